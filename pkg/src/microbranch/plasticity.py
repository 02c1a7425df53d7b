"""Crystal plasticity with two slip systems on the unit grain (0, 1)^3.

A pair (u, beta) is built from a two-dimensional profile v(t, x2) composed
with the signed distance d(x) of (x1, x3) to the boundary of the unit square:

    u    = x_xi - sqrt(2) v(d(x), x2)                       for 0 < x2 < 1,
    beta = e_xi - sqrt(2) d2v(d(x), x2) [d(x) <= T] e_2,

so beta is e_xi or e_eta pointwise.  Profiles are stored as two-slope fields
``w`` of :mod:`microbranch.constructions` with v = theta x2 - w.  Level sets
of d are squares of perimeter 4(1 + 2t) inside and rounded squares of
perimeter 4 + 2 pi t outside, which reduces every volume integral to a
one-dimensional integral in t of x2-slice integrals that are known exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .austenite import Austenite
from .cells import StripIntegrator, evaluate_cell, l2_distance_to_trace
from .constructions import CELLS, SLAB, MicrostructureField, build_tsb
from .energy import EnergyBreakdown
from .params import (BRANCHING, LAMINATE, PERIODIC, TWO_SCALE, UNIFORM, ConstructionParams,
                     ModelParams, ParameterError, truncation_level_for)

TRIVIAL = "Trivial"
PLASTIC_REGIMES = (LAMINATE, BRANCHING, TWO_SCALE, UNIFORM, TRIVIAL)

SQ2 = math.sqrt(2.0)
E_XI = np.array([1.0, 1.0, 0.0]) / SQ2
E_ETA = np.array([1.0, -1.0, 0.0]) / SQ2


@dataclass(frozen=True)
class PlasticParams:
    """Line tension ``eps``, exterior modulus ``mu``, minority fraction ``theta``, grain size ``L``."""

    eps: float
    mu: float
    theta: float
    L: float = 1.0

    def __post_init__(self) -> None:
        ModelParams(eps=self.eps, mu=self.mu, L=self.L, theta=self.theta)

    @property
    def eps_hat(self) -> float:
        return self.eps / (self.L * self.theta**2)

    @classmethod
    def from_eps_hat(cls, eps_hat: float, mu: float, theta: float, L: float = 1.0) -> "PlasticParams":
        return cls(eps_hat * L * theta**2, mu, theta, L)

    def unit(self) -> "PlasticParams":
        """Parameters of the rescaled problem on the unit grain (same eps_hat)."""
        return PlasticParams(self.eps_hat * self.theta**2, self.mu, self.theta, 1.0)

    def u0(self, x: np.ndarray) -> np.ndarray:
        """Far-field deformation (1 - theta) x_xi + theta x_eta; ``x`` has shape (..., 3)."""
        return (1.0 - self.theta) * (x @ E_XI) + self.theta * (x @ E_ETA)

    def model_params(self) -> ModelParams:
        return ModelParams(eps=self.eps, mu=self.mu, L=self.L, theta=self.theta)


@dataclass(frozen=True, eq=False)
class VKMProfile:
    """Two-slope field ``w`` (or None for w = 0) with truncation abscissa ``T``.

    ``kind`` is ``lift`` for profiles from constructions, ``trivial`` for
    w = 0 with T = -1/2 and ``uniform`` for the separate cut-off pair.
    """

    kind: str
    field: MicrostructureField | None
    T: float
    info: dict


def signed_distance(x1, x3) -> np.ndarray:
    """Signed distance of (x1, x3) to the boundary of the unit square (negative inside)."""
    x1 = np.asarray(x1, dtype=float)
    x3 = np.asarray(x3, dtype=float)
    inside = (x1 > 0) & (x1 < 1) & (x3 > 0) & (x3 < 1)
    d_in = -np.minimum(np.minimum(x1, 1 - x1), np.minimum(x3, 1 - x3))
    ox = np.maximum(np.maximum(-x1, x1 - 1), 0.0)
    oz = np.maximum(np.maximum(-x3, x3 - 1), 0.0)
    return np.where(inside, d_in, np.hypot(ox, oz))


# -- profiles ------------------------------------------------------------------------


def build_vkm(regime: str, params: PlasticParams) -> VKMProfile:
    """Profile and truncation abscissa for one regime of the unit-grain problem.

    Period counts use the constant 1 before rounding.  A two-scale band
    height N*mu outside [theta, 1] is clamped and the raw value is kept in
    ``info['h_raw']``.
    """
    p = params.unit()
    th, mu, eh = p.theta, p.mu, p.eps_hat
    if regime == TRIVIAL:
        return VKMProfile("trivial", None, -0.5, {"regime": regime})
    if regime == UNIFORM:
        return VKMProfile("uniform", None, 0.0, {"regime": regime})
    mp = ModelParams(eps=p.eps, mu=mu, L=1.0, theta=th, bc=PERIODIC)
    if regime == LAMINATE:
        N = max(1, round(math.sqrt(mu * math.log(1.0 / th**2) / eh)))
        cp = ConstructionParams(N=N, h=th, ell=1.0, theta=th, L=1.0, bc=PERIODIC)
        return VKMProfile("lift", build_tsb(cp, mp), 0.0, {"regime": regime, "N": N, "h": th})
    if regime == BRANCHING:
        N = max(1, round(eh ** (-1.0 / 3.0)))
        h = 1.0
        h_raw = 1.0
    elif regime == TWO_SCALE:
        N = max(1, round(math.sqrt(mu * math.log(3.0 + eh / mu**3) / eh)))
        h_raw = N * mu
        h = min(1.0, max(th, h_raw))
    else:
        raise ParameterError(f"no profile for regime {regime!r}")
    info = {"regime": regime, "N": N, "h": h, "h_raw": h_raw}
    if h <= th:
        # clamped onto the laminate: sharp pattern up to the interface
        cp = ConstructionParams(N=N, h=th, ell=1.0, theta=th, L=1.0, bc=PERIODIC)
        return VKMProfile("lift", build_tsb(cp, mp), 0.0, dict(info, I=None))
    I = truncation_level_for(N, 1.0, th)
    cp = ConstructionParams(N=N, h=h, ell=1.0, theta=th, L=1.0, bc=PERIODIC, truncation_level=I)
    field = build_tsb(cp, mp)
    T = -(3.0**-I)
    return VKMProfile("lift", field, T, dict(info, I=I))


@dataclass(frozen=True, eq=False)
class PlasticState:
    """Lifted pair (u, beta) on the unit grain, scaled to grain size ``params.L``."""

    vkm: VKMProfile
    T: float
    params: PlasticParams
    n: int = 32

    # -- pointwise evaluators on the unit grain --------------------------------

    def _w(self, t, y):
        f = self.vkm.field
        if f is None:
            return np.zeros(np.broadcast(t, y).shape), np.zeros(np.broadcast(t, y).shape, dtype=np.int8)
        w, bit = f._evaluate(t, y)
        return w, bit

    def u_unit(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = self.params
        th = p.theta
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        x_xi = x @ E_XI
        if self.vkm.kind == "uniform":
            dist = _box_distance(x)
            return (1 - th) * x_xi + th * (x @ E_ETA) * np.minimum(1.0, dist)
        slab = (x2 > 0) & (x2 < 1)
        d = signed_distance(x1, x3)
        w, _ = self._w(d, np.clip(x2, 0, 1))
        v = th * x2 - w
        return np.where(slab, x_xi - SQ2 * v, p.u0(x))

    def beta_unit(self, x: np.ndarray) -> np.ndarray:
        """beta at points inside the grain, shape (..., 3)."""
        x = np.asarray(x, dtype=float)
        if self.vkm.kind == "uniform":
            return np.broadcast_to((1 - self.params.theta) * E_XI, x.shape).copy()
        d = signed_distance(x[..., 0], x[..., 2])
        _, bit = self._w(d, x[..., 1])
        b = np.where(d <= self.T, bit == 1, False).astype(float)
        return (1.0 - b)[..., None] * E_XI + b[..., None] * E_ETA

    def u(self, x: np.ndarray) -> np.ndarray:
        L = self.params.L
        return L * self.u_unit(np.asarray(x, dtype=float) / L)

    def beta(self, x: np.ndarray) -> np.ndarray:
        return self.beta_unit(np.asarray(x, dtype=float) / self.params.L)

    def as_dict(self) -> dict:
        return {"vkm": dict(self.vkm.info, kind=self.vkm.kind), "T": self.T, "n": self.n}


def _box_distance(x: np.ndarray) -> np.ndarray:
    out = np.maximum(np.maximum(-x, x - 1.0), 0.0)
    return np.sqrt(np.sum(out**2, axis=-1))


def lift_km_to_3d(vkm: VKMProfile, T: float, params: PlasticParams, n: int = 32) -> PlasticState:
    """Compose the profile with the signed distance; checks the profile's boundary values."""
    if T > 0 or T < -0.5:
        raise ParameterError("T must lie in [-1/2, 0]")
    f = vkm.field
    if f is not None:
        if abs(f.theta - params.theta) > 0:
            raise ParameterError("profile theta differs from params theta")
        ts = np.concatenate([[s.x_lo, 0.5 * (s.x_lo + s.x_hi)] for s in f.strips] + [[0.0, 0.25, 1.0]])
        ts = ts[ts >= -0.5]
        top = f.evaluate(ts, np.ones_like(ts))
        bottom = f.evaluate(ts, np.zeros_like(ts))
        if np.max(np.abs(top)) > 1e-12 or np.max(np.abs(bottom)) > 1e-12:
            raise ParameterError("profile violates v(t,0)=0, v(t,1)=theta")
        for s in f.strips:
            if s.kind != CELLS and s.x_lo < T - 1e-15 and s.x_hi > -0.5:
                raise ParameterError("profile has no two-slope pattern left of T")
    if n < 16:
        raise ParameterError("grid resolution n must be at least 16")
    return PlasticState(vkm, T, params, n)


# -- semi-analytic energy ------------------------------------------------------------


def _x1_face_tv(q: float) -> float:
    return SQ2 * max(1.0, abs(q))


def _x3_face_tv(q: float) -> float:
    return SQ2 + 2.0 * abs(q)


def _perimeter_integral(a: float, b: float) -> float:
    """int_a^b 4 (1 + 2t) dt."""
    return 4.0 * (b - a) + 4.0 * (b * b - a * a)


def _sharp_terms(state: PlasticState) -> tuple[float, float]:
    """Elastic energy and interface variation of the two-slope part d <= T."""
    f = state.vkm.field
    T = state.T
    elastic = tv = 0.0
    if f is None:
        return 0.0, 0.0
    for strip in f.strips:
        lo, hi = max(strip.x_lo, -0.5), min(strip.x_hi, T)
        if hi <= lo:
            continue
        if strip.kind != CELLS:
            raise ParameterError("two-slope region contains a non-exact strip")
        x_hi = strip.x_hi
        integ = StripIntegrator(f.theta, strip.length, weight=lambda s, x_hi=x_hi: 8.0 * (1.0 + 2.0 * (s + x_hi)),
                                s_range=(lo - x_hi, hi - x_hi))
        summ = integ.summary(strip.cell)
        elastic += summ.gamma
        half = 0.5 * _perimeter_integral(lo, hi)  # x1-type and x3-type faces share the perimeter
        for q, count in summ.interfaces.items():
            tv += count * half * (_x1_face_tv(q) + _x3_face_tv(q))
    return elastic, tv


def _slab_profiles(state: PlasticState):
    """Frozen pattern (cell) at T and trace at 0 bounding the interpolation slab."""
    f = state.vkm.field
    if f is None:
        return None, None
    for strip in f.strips:
        if strip.kind == SLAB:
            return strip.cell, strip.right
    return None, None


def _slab_elastic(state: PlasticState) -> float:
    """int over T < d < 0 of 2 |Dv|^2, exact."""
    T = state.T
    if T >= 0.0:
        return 0.0
    th = state.params.theta
    cell, right = _slab_profiles(state)
    if cell is None and state.vkm.field is not None:
        raise ParameterError("T < 0 needs an interpolation slab in the profile")
    if cell is None:
        # w = 0: v = theta x2 throughout
        dist2 = 0.0
        a2 = ac = c2 = 0.0
    else:
        dist2 = l2_distance_to_trace(cell, th, 0.0, right)
        bx = right.breakpoints
        uL, _ = evaluate_cell(cell, th, np.zeros_like(bx), bx)
        c = th - right.slopes  # theta - w_R'
        minority = th * np.diff(bx) - np.diff(uL)  # measure of {w_L' = theta - 1} per piece
        a2 = float(np.sum(minority))
        ac = float(np.sum(c * minority))
        c2 = float(np.sum(c * c * np.diff(bx)))
    # v = theta x2 - w, w = lam w_L + (1 - lam) w_R, lam = t / T
    # (d1 v)^2 slice = dist2 / T^2; (d2 v)^2 slice = int (lam a + (1-lam) c)^2 with a = theta - w_L'
    lo = max(T, -0.5)
    gx, gw = np.polynomial.legendre.leggauss(4)
    t = 0.5 * lo + 0.5 * lo * gx  # nodes on [lo, 0]
    wts = 0.5 * (-lo) * gw
    lam = t / T
    slice_ = dist2 / T**2 + lam**2 * a2 + 2 * lam * (1 - lam) * ac + (1 - lam) ** 2 * c2
    if cell is None:
        slice_ = np.full_like(t, th**2)
    return float(np.sum(wts * 2.0 * 4.0 * (1.0 + 2.0 * t) * slice_))


def _seam_tv(state: PlasticState) -> float:
    T = state.T
    if T >= 0.0 or T <= -0.5 or state.vkm.field is None:
        return 0.0
    side = 2.0 * (1.0 + 2.0 * T)  # length of x1-type (and of x3-type) faces
    return state.params.theta * (SQ2 + 2.0) * side


def _exterior(state: PlasticState, rtol: float = 1e-8) -> tuple[float, float]:
    """int_{d > 0} 2 |grad w|^2 weighted by the level-set perimeter; also the corner share."""
    f = state.vkm.field
    if f is None:
        return 0.0, 0.0
    aus: Austenite = f.austenite
    b = aus.support
    if b <= 0:
        return 0.0, 0.0
    flat, _ = integrate.quad(lambda t: 2.0 * 4.0 * aus.slice_energy(t), 0.0, b, epsrel=rtol, limit=200)
    corner, _ = integrate.quad(lambda t: 2.0 * 2.0 * math.pi * t * aus.slice_energy(t), 0.0, b,
                               epsrel=rtol, limit=200)
    return flat + corner, corner


def _uniform_exterior_unit(theta: float, order: int = 24) -> float:
    """int |D(u - u0)|^2 outside the unit cube for the cut-off pair, without mu.

    u - u0 = theta x_eta (min(1, dist) - 1).  The collar splits into face slabs,
    edge quarter-cylinders and corner octants, each integrated with tensor
    Gauss rules in coordinates where the integrand is smooth.
    """
    gx, gw = np.polynomial.legendre.leggauss(order)
    g01 = 0.5 * (gx + 1.0)
    w01 = 0.5 * gw
    total = 0.0
    # sides: 0 below, 1 inside, 2 above
    for sides in np.ndindex(3, 3, 3):
        out_axes = [a for a in range(3) if sides[a] != 1]
        in_axes = [a for a in range(3) if sides[a] == 1]
        k = len(out_axes)
        if k == 0:
            continue
        # parameter grids: in-axis coordinates in [0, 1]; out block by radius and angles
        if k == 1:
            r, wr = g01, w01
            pts_r = r
            jac = wr
            unit = np.ones((r.size, 1))
        elif k == 2:
            R, PHI = np.meshgrid(g01, 0.5 * math.pi * g01, indexing="ij")
            WR = np.outer(w01, 0.5 * math.pi * w01)
            pts_r = R.ravel()
            unit = np.stack([np.cos(PHI).ravel(), np.sin(PHI).ravel()], axis=1)
            jac = (WR * R).ravel()
        else:
            R, PH, PS = np.meshgrid(g01, 0.5 * math.pi * g01, 0.5 * math.pi * g01, indexing="ij")
            WR = np.einsum("i,j,k->ijk", w01, 0.5 * math.pi * w01, 0.5 * math.pi * w01)
            pts_r = R.ravel()
            unit = np.stack([(np.sin(PS) * np.cos(PH)).ravel(), (np.sin(PS) * np.sin(PH)).ravel(),
                             np.cos(PS).ravel()], axis=1)
            jac = (WR * R**2 * np.sin(PS)).ravel()
        # inside coordinates
        m = len(in_axes)
        if m:
            grids = np.meshgrid(*([g01] * m), indexing="ij")
            wgrid = np.ones_like(grids[0])
            for gi in range(m):
                wgrid = wgrid * np.meshgrid(*([w01] * m), indexing="ij")[gi]
            inside_pts = np.stack([g.ravel() for g in grids], axis=1)
            inside_w = wgrid.ravel()
        else:
            inside_pts = np.zeros((1, 0))
            inside_w = np.ones(1)
        npts = pts_r.size * inside_w.size
        X = np.zeros((npts, 3))
        grad_dist = np.zeros((npts, 3))
        rr = np.repeat(pts_r, inside_w.size)
        W = np.outer(jac, inside_w).ravel()
        for j, a in enumerate(out_axes):
            off = np.repeat(pts_r * unit[:, j], inside_w.size)
            sign = -1.0 if sides[a] == 0 else 1.0
            X[:, a] = (0.0 if sides[a] == 0 else 1.0) + sign * off
            grad_dist[:, a] = sign * np.repeat(unit[:, j], inside_w.size)
        for j, a in enumerate(in_axes):
            X[:, a] = np.tile(inside_pts[:, j], pts_r.size)
        x_eta = X @ E_ETA
        grad = theta * ((rr - 1.0)[:, None] * E_ETA[None, :] + x_eta[:, None] * grad_dist)
        total += float(np.sum(W * np.sum(grad**2, axis=1)))
    return total


def plastic_energy(state: PlasticState, params: PlasticParams | None = None) -> EnergyBreakdown:
    """Elastic, dislocation and exterior energy of a lifted pair.

    Evaluated on the unit grain with the same eps_hat and scaled by L^3.
    Terms: ``elastic`` (including ``elastic_slab``), ``dislocation``
    (including ``dislocation_seam``), ``exterior`` (including
    ``exterior_corner``, the share of the rounded collar corners) and ``total``.
    """
    params = state.params if params is None else params
    unit = params.unit()
    th, mu, eps = unit.theta, unit.mu, unit.eps
    scale = params.L**3
    if state.vkm.kind == "uniform":
        ext = mu * _uniform_exterior_unit(th)
        terms = {"elastic": 0.0, "elastic_slab": 0.0, "dislocation": 0.0, "dislocation_seam": 0.0,
                 "exterior": ext, "exterior_corner": 0.0, "total": ext}
    else:
        el_sharp, tv = _sharp_terms(state)
        el_slab = _slab_elastic(state)
        seam = _seam_tv(state)
        ext, corner = _exterior(state)
        ext *= mu
        corner *= mu
        dis = eps * (tv + seam)
        elastic = el_sharp + el_slab
        terms = {"elastic": elastic, "elastic_slab": el_slab, "dislocation": dis,
                 "dislocation_seam": eps * seam, "exterior": ext, "exterior_corner": corner,
                 "total": elastic + dis + ext}
    out = EnergyBreakdown({k: scale * v for k, v in terms.items()})
    out.check_finite()
    return out


# -- grid route ----------------------------------------------------------------------


def grid_energy(state: PlasticState, n: int | None = None) -> EnergyBreakdown:
    """Elastic energy and dislocation variation from samples on an n^3 grid of the grain.

    Du is the gradient of the trilinear interpolant of nodal samples, beta is
    sampled at cell centres, and the variation of beta uses differences along
    the lattice diagonals for the slip directions and along x3.  The exterior
    term is not sampled.  Works at the physical grain size L.
    """
    n = state.n if n is None else n
    if n < 16:
        raise ParameterError("grid resolution n must be at least 16")
    L = state.params.L
    eps = state.params.eps
    h = L / n
    nodes = np.linspace(0.0, L, n + 1)
    X = np.stack(np.meshgrid(nodes, nodes, nodes, indexing="ij"), axis=-1)
    U = state.u(X)
    # trilinear gradient at cell centres
    d1 = np.diff(U, axis=0)
    g1 = 0.25 * (d1[:, :-1, :-1] + d1[:, 1:, :-1] + d1[:, :-1, 1:] + d1[:, 1:, 1:]) / h
    d2 = np.diff(U, axis=1)
    g2 = 0.25 * (d2[:-1, :, :-1] + d2[1:, :, :-1] + d2[:-1, :, 1:] + d2[1:, :, 1:]) / h
    d3 = np.diff(U, axis=2)
    g3 = 0.25 * (d3[:-1, :-1, :] + d3[1:, :-1, :] + d3[:-1, 1:, :] + d3[1:, 1:, :]) / h
    centres = 0.5 * (nodes[:-1] + nodes[1:])
    C = np.stack(np.meshgrid(centres, centres, centres, indexing="ij"), axis=-1)
    B = state.beta(C)
    elastic = float(np.sum((g1 - B[..., 0]) ** 2 + (g2 - B[..., 1]) ** 2 + (g3 - B[..., 2]) ** 2) * h**3)
    b_eta = B @ E_ETA
    b_xi = B @ E_XI
    # a jump of size 1 crossed along a diagonal step of length sqrt(2) h
    diag_p = np.abs(b_eta[1:, 1:, :] - b_eta[:-1, :-1, :])  # along e1 + e2 (xi)
    diag_m = np.abs(b_xi[1:, :-1, :] - b_xi[:-1, 1:, :])  # along e1 - e2 (eta)
    tv = (np.sum(diag_p) + np.sum(diag_m)) * h**2 / SQ2
    tv += (np.sum(np.abs(np.diff(b_eta, axis=2))) + np.sum(np.abs(np.diff(b_xi, axis=2)))) * h**2
    dis = eps * tv
    return EnergyBreakdown({"elastic": elastic, "dislocation": dis, "total": elastic + dis})


def step0_trivial(params: PlasticParams) -> PlasticState:
    return lift_km_to_3d(build_vkm(TRIVIAL, params), -0.5, params)


def step0_uniform(params: PlasticParams) -> PlasticState:
    return PlasticState(build_vkm(UNIFORM, params), 0.0, params)
