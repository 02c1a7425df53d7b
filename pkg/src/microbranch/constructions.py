"""Explicit microstructure test patterns on the martensite strip (-L, 0) x (0, 1).

Every field is stored exactly: a sequence of vertical strips, each holding a
cell tree (see :mod:`microbranch.cells`) whose interfaces are affine in x1,
plus a closed-form austenite extension for x1 >= 0.  Fields are normalised
so that u(x1, 0) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .austenite import RAMP, SINGLE_LAMINATE, TSB, ZERO, Austenite, tsb_limit_trace
from .cells import (Cell, Leaf, Stack, StripIntegrator, check_cell, evaluate_cell,
                    expand_breakpoints, roll_cell)
from .params import NEUMANN, PERIODIC, ConstructionParams, ModelParams, ParameterError
from .trace import TraceProfile

CELLS = "cells"
TAIL = "tail"
SLAB = "slab"

MIN_LEVEL_HEIGHT = 1e-9
MAX_LEVELS = 60


@dataclass(frozen=True)
class InterfaceCurve:
    """Graph-like curve across which d(u)/d(x2) jumps by 1."""

    polyline: tuple[tuple[float, float], ...]
    jump: int = 1

    def __post_init__(self) -> None:
        x = [p[0] for p in self.polyline]
        if len(x) < 2 or any(b <= a for a, b in zip(x, x[1:])):
            raise ValueError("polyline must have strictly increasing x1")

    @property
    def horizontal_projection(self) -> float:
        return float(sum(abs(b[0] - a[0]) for a, b in zip(self.polyline, self.polyline[1:])))

    @property
    def vertical_projection(self) -> float:
        return float(sum(abs(b[1] - a[1]) for a, b in zip(self.polyline, self.polyline[1:])))


@dataclass(frozen=True, eq=False)
class Strip:
    """Vertical strip ``x_lo <= x1 <= x_hi``; cell coordinates use s = x1 - x_hi.

    ``kind`` is ``cells`` for exact patterns, ``tail`` for the frozen stand-in
    of infinitely many refinement levels (energies added analytically) and
    ``slab`` for a linear interpolation between the frozen pattern ``cell`` at
    ``x_lo`` and the trace ``right`` at ``x_hi``.
    """

    x_lo: float
    x_hi: float
    cell: Cell
    kind: str = CELLS
    right: TraceProfile | None = None

    def __post_init__(self) -> None:
        if not self.x_hi > self.x_lo:
            raise ValueError("strip must have positive width")
        if self.kind not in (CELLS, TAIL, SLAB):
            raise ValueError(f"unknown strip kind {self.kind!r}")
        if self.kind == SLAB and self.right is None:
            raise ValueError("slab strips need a right trace")

    @property
    def length(self) -> float:
        return self.x_hi - self.x_lo


@dataclass(frozen=True)
class TailCorrection:
    """Analytic contribution of the refinement levels beyond the last stored one."""

    elastic: float
    horizontal: float
    vertical: float


@dataclass(frozen=True, eq=False)
class MicrostructureField:
    theta: float
    L: float
    strips: tuple[Strip, ...]
    austenite: Austenite
    bc: str = NEUMANN
    height: float = 1.0
    tail: TailCorrection | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.strips:
            raise ValueError("field needs at least one strip")
        if abs(self.strips[0].x_lo + self.L) > 1e-12 * self.L or self.strips[-1].x_hi != 0.0:
            raise ValueError("strips must cover [-L, 0]")
        for a, b in zip(self.strips, self.strips[1:]):
            if a.x_hi != b.x_lo:
                raise ValueError("strips must be contiguous")
        for s in self.strips:
            if abs(s.cell.height - self.height) > 1e-12 * self.height:
                raise ValueError("strip cell height does not match the field height")

    # -- structure ---------------------------------------------------------

    @property
    def has_slab(self) -> bool:
        return any(s.kind == SLAB for s in self.strips)

    @property
    def edges(self) -> np.ndarray:
        return np.array([s.x_lo for s in self.strips] + [0.0])

    def strip_index(self, x1) -> np.ndarray:
        idx = np.searchsorted(self.edges, np.asarray(x1, dtype=float), side="right") - 1
        return np.clip(idx, 0, len(self.strips) - 1)

    # -- pointwise evaluation ------------------------------------------------

    def evaluate(self, x1, x2) -> np.ndarray:
        """u at the given points; x1 >= 0 uses the austenite extension."""
        return self._evaluate(x1, x2)[0]

    def slope_bit(self, x1, x2) -> np.ndarray:
        """0 where d(u)/d(x2) = theta, 1 where it is theta - 1, -1 outside the two-slope set."""
        return self._evaluate(x1, x2)[1]

    def _evaluate(self, x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        value = np.zeros(x1.shape)
        bit = np.full(x1.shape, -1, dtype=np.int8)
        aus = x1 >= 0.0
        if np.any(aus):
            value[aus] = self.austenite.value(x1[aus], x2[aus])
        mart = ~aus
        if not np.any(mart):
            return value, bit
        idx = self.strip_index(x1)
        memo: dict = {}
        for k, strip in enumerate(self.strips):
            sel = mart & (idx == k)
            if not np.any(sel):
                continue
            s = x1[sel] - strip.x_hi
            y = x2[sel]
            if strip.kind == CELLS:
                v, b = evaluate_cell(strip.cell, self.theta, s, y, memo)
            elif strip.kind == TAIL:
                v, b = evaluate_cell(strip.cell, self.theta, np.zeros_like(s), y, memo)
            else:
                left, _ = evaluate_cell(strip.cell, self.theta, np.zeros_like(s), y, memo)
                t = s / (strip.x_lo - strip.x_hi)
                v = t * left + (1.0 - t) * strip.right(y)
                b = np.full(y.shape, -1, dtype=np.int8)
            value[sel] = v
            bit[sel] = b
        return value, bit

    # -- interfaces ----------------------------------------------------------

    def integrators(self, weight=None) -> list[tuple[Strip, StripIntegrator]]:
        out = []
        for strip in self.strips:
            if strip.kind == CELLS:
                out.append((strip, StripIntegrator(self.theta, strip.length, weight)))
        return out

    def projections(self) -> tuple[float, float]:
        """Total (horizontal, vertical) projection of all interfaces, tail included."""
        if self.has_slab:
            raise ValueError("interpolation slabs carry no sharp interfaces")
        horiz = vert = 0.0
        for strip, integ in self.integrators():
            summ = integ.summary(strip.cell)
            for q, count in summ.interfaces.items():
                horiz += count * strip.length
                vert += count * abs(q) * strip.length
        if self.tail is not None:
            horiz += self.tail.horizontal
            vert += self.tail.vertical
        return horiz, vert

    def interface_count(self) -> int:
        total = 0
        for strip, integ in self.integrators():
            total += sum(integ.summary(strip.cell).interfaces.values())
        return total

    def interfaces(self, limit: int = 200_000) -> list[InterfaceCurve]:
        """Explicit interface polylines of all exact strips (tail levels excluded)."""
        if self.interface_count() > limit:
            raise ValueError("too many interfaces to list explicitly")
        curves = []
        for strip in self.strips:
            if strip.kind != CELLS:
                continue
            for p, q in iter_interfaces(strip.cell):
                y_lo = p - q * strip.length
                curves.append(InterfaceCurve(((strip.x_lo, y_lo), (strip.x_hi, p))))
        return curves

    def minority_fractions(self) -> list[float]:
        """Area fraction of {d(u)/d(x2) = theta - 1} in each exact strip."""
        out = []
        for strip, integ in self.integrators():
            summ = integ.summary(strip.cell)
            out.append(summ.minority_area / (strip.length * self.height))
        return out

    def is_periodic(self, tol: float = 1e-9) -> bool:
        """u(x1, top) = u(x1, 0) for all x1 in the martensite."""
        target = self.theta
        return all(abs(f - target) <= tol for f in self.minority_fractions())


def iter_interfaces(cell: Cell, y0: float = 0.0) -> Iterator[tuple[float, float]]:
    """Absolute (p, q) of every interface, including jumps at cell junctions."""
    prev = [None]

    def walk(c: Cell, y: float):
        if isinstance(c, Leaf):
            if prev[0] is not None and prev[0] != c.first_bit:
                yield (y, 0.0)
            for pk, qk in zip(c.p, c.q):
                yield (y + pk, qk)
            prev[0] = c.last_bit
            return
        for child, reps in c.parts:
            for j in range(reps):
                yield from walk(child, y + j * child.height)
            y += reps * child.height

    yield from walk(cell, y0)


# -- elementary builders ------------------------------------------------------


def _check_theta_L(theta: float, L: float) -> None:
    ModelParams(eps=1.0, mu=1.0, L=L, theta=theta)


def build_uniform(theta: float, L: float) -> MicrostructureField:
    """u = theta * x2 in the martensite, linear ramp to zero on 0 <= x1 <= 1."""
    _check_theta_L(theta, L)
    strip = Strip(-L, 0.0, Leaf(1.0, 0))
    return MicrostructureField(theta, L, (strip,), Austenite(RAMP, theta), NEUMANN,
                               info={"kind": "uniform"})


def build_single_laminate(theta: float, L: float, bc: str = PERIODIC) -> MicrostructureField:
    """One horizontal stripe of the minority slope on 0 < x2 < theta, fanned out in the austenite.

    The field is admissible for both boundary conditions; ``bc`` only tags it.
    """
    _check_theta_L(theta, L)
    if bc not in (NEUMANN, PERIODIC):
        raise ParameterError(f"unknown bc {bc!r}")
    cell = Leaf(1.0, 1, (theta,), (0.0,))
    return MicrostructureField(theta, L, (Strip(-L, 0.0, cell),),
                               Austenite(SINGLE_LAMINATE, theta), bc,
                               info={"kind": "single_laminate"})


def _check_branch_args(h: float, eta: float, ell: float, theta: float) -> None:
    if not (0.0 < theta <= 0.5):
        raise ParameterError("theta must lie in (0, 1/2]")
    if not (h > 0 and ell > 0 and math.isfinite(h) and math.isfinite(ell)):
        raise ParameterError("h and ell must be positive")
    if not (theta * h * (1 - 1e-12) <= eta <= h * (1 + 1e-12)):
        raise ParameterError(f"eta={eta} outside [theta*h, h] = [{theta * h}, {h}]")


def branch_leaf(h: float, eta: float, ell: float) -> Leaf:
    """One branching cell: a centred stripe of width eta at s=-ell splits into two of width eta/2 at s=0."""
    a = eta / (2.0 * ell)
    p = ((h - eta) / 4, (h + eta) / 4, h / 2, h / 2, (3 * h - eta) / 4, (3 * h + eta) / 4)
    q = (0.0, a, a, -a, -a, 0.0)
    return Leaf(h, 0, p, q).canonical()


def connected_branch_leaf(h: float, eta: float, ell: float) -> Leaf:
    """Variant whose stripes tilt apart instead of splitting off a new stripe."""
    c = (h - eta) / (4.0 * ell)
    p = ((h - eta) / 4, (h + eta) / 4, (3 * h - eta) / 4, (3 * h + eta) / 4)
    q = (-c, -c, c, c)
    return Leaf(h, 0, p, q).canonical()


def _patch(leaf: Leaf, h: float, eta: float, ell: float, theta: float, kind: str) -> MicrostructureField:
    check_cell(leaf, ell)
    return MicrostructureField(theta, ell, (Strip(-ell, 0.0, leaf),), Austenite(ZERO), NEUMANN,
                               height=h, info={"kind": kind, "h": h, "eta": eta, "ell": ell})


def branch_cell(h: float, eta: float, ell: float, theta: float) -> MicrostructureField:
    """Branching patch on (-ell, 0) x (0, h)."""
    _check_branch_args(h, eta, ell, theta)
    return _patch(branch_leaf(h, eta, ell), h, eta, ell, theta, "branch_cell")


def branch_cell_connected(h: float, eta: float, ell: float, theta: float) -> MicrostructureField:
    """Connected branching patch on (-ell, 0) x (0, h)."""
    _check_branch_args(h, eta, ell, theta)
    return _patch(connected_branch_leaf(h, eta, ell), h, eta, ell, theta, "branch_cell_connected")


def half_period_projections(patch: MicrostructureField) -> tuple[float, float]:
    """Horizontal and vertical interface projections within the lower half x2 < h/2."""
    strip = patch.strips[0]
    leaf = strip.cell
    half = leaf.height / 2.0
    horiz = vert = 0.0
    for p, q in zip(leaf.p, leaf.q):
        y0, y1 = p - q * strip.length, p
        if max(y0, y1) <= half * (1 + 1e-12):
            horiz += strip.length
            vert += abs(q) * strip.length
    return horiz, vert


# -- two-scale branching ---------------------------------------------------------


def _level_cell(cp: ConstructionParams, i: int) -> Cell:
    N, h, th = cp.N, cp.h, cp.theta
    hi = h / (2**i * N)
    eta = th / (2**i * N)
    ell_i = (2.0 / 3.0) * 3.0**-i * cp.ell
    leaf = branch_leaf(hi, min(eta, hi), ell_i)
    gap = 0.5 * (1.0 - h) / N
    parts = []
    if gap > 0:
        parts.append((Leaf(gap, 0), 1))
    parts.append((leaf, 2**i))
    if gap > 0:
        parts.append((Leaf(gap, 0), 1))
    period = Stack(tuple(parts))
    return period if N == 1 else Stack(((period, N),))


def _is_laminate(cp: ConstructionParams) -> bool:
    return cp.h <= cp.theta * (1 + 1e-12)


def build_tsb(cparams: ConstructionParams, params: ModelParams) -> MicrostructureField:
    """Two-scale branching pattern with austenite fan and, for ell < L, a boundary layer.

    Level ``i`` occupies ``-3**-i ell <= x1 <= -3**-(i+1) ell`` and holds
    ``2**i`` branching cells per band.  Without a truncation level the
    refinement is stored until the cell height drops below 1e-9 (or 60
    levels) and the remaining levels are summed as geometric series.  With a
    truncation level ``I`` the pattern stops at ``T = -3**-I ell`` and u is
    interpolated linearly between u(T, .) and the limit trace on (T, 0).
    """
    cp = cparams
    if abs(cp.theta - params.theta) > 0 or abs(cp.L - params.L) > 1e-12 * params.L:
        raise ParameterError("construction and model parameters disagree on theta or L")
    if cp.uniform:
        return build_uniform(cp.theta, cp.L)
    N, h, ell, th, L = cp.N, cp.h, cp.ell, cp.theta, cp.L
    rolled = cp.bc == NEUMANN and ell < L * (1 - 1e-12)
    shift = 0.5 if rolled else 0.0
    limit = tsb_limit_trace(N, h, th, 0.0)

    strips: list[Strip] = []
    tail = None
    levels = 0
    if _is_laminate(cp):
        strips.append(Strip(-ell, 0.0, _level_cell(cp, 0)))
        levels = 1
    elif cp.truncation_level is not None:
        I = cp.truncation_level
        for i in range(I):
            strips.append(Strip(-(3.0**-i) * ell, -(3.0 ** -(i + 1)) * ell, _level_cell(cp, i)))
        T = -(3.0**-I) * ell
        if I > 0:
            left = _level_cell(cp, I - 1).frozen_at(0.0)
        else:
            left = _level_cell(cp, 0).frozen_at(-(2.0 / 3.0) * ell)
        strips.append(Strip(T, 0.0, left, SLAB, limit))
        levels = I
    else:
        i = 0
        while i < MAX_LEVELS and h / (2**i * N) >= MIN_LEVEL_HEIGHT:
            strips.append(Strip(-(3.0**-i) * ell, -(3.0 ** -(i + 1)) * ell, _level_cell(cp, i)))
            i += 1
        levels = i
        last = strips[-1]
        summ = StripIntegrator(th, last.length).summary(last.cell)
        horiz = sum(summ.interfaces.values()) * last.length
        # elastic energy per level shrinks by 3/4, interface length by 2/3
        tail = TailCorrection(elastic=3.0 * summ.gamma, horizontal=2.0 * horiz, vertical=math.inf)
        strips.append(Strip(last.x_hi, 0.0, last.cell.frozen_at(0.0), TAIL))

    # boundary layer for ell < L (N = 1 only)
    if ell < L * (1 - 1e-12):
        first = strips[0]
        edge = first.cell.frozen_at(first.x_lo - first.x_hi) if first.kind == CELLS else first.cell
        if cp.bc == PERIODIC:
            strips.insert(0, Strip(-L, -ell, edge))
        else:
            strips = [_roll_strip(s, shift) for s in strips]
            layer_lo = max(-L, -2.0 * ell)
            a = th / (2.0 * ell)
            layer = Leaf(1.0, 1, (th / 2, 1.0 - th / 2), (a, -a)).canonical()
            head = [Strip(layer_lo, -ell, layer)]
            if layer_lo > -L:
                head.insert(0, Strip(-L, layer_lo, Leaf(1.0, 0)))
            strips = head + strips
    for s in strips:
        if s.kind == CELLS:
            check_cell(s.cell, s.length)
    austenite = Austenite(TSB, th, N, h, shift)
    info = {"kind": "tsb", "N": N, "h": h, "ell": ell, "truncation_level": cp.truncation_level,
            "levels": levels, "rolled": rolled}
    return MicrostructureField(th, L, tuple(strips), austenite, cp.bc, tail=tail, info=info)


def _roll_strip(strip: Strip, shift: float) -> Strip:
    if strip.kind == SLAB:
        return Strip(strip.x_lo, strip.x_hi, roll_cell(strip.cell, shift), SLAB,
                     strip.right.rolled(shift))
    s_vals = (-strip.length, 0.0) if strip.kind == CELLS else (0.0,)
    return Strip(strip.x_lo, strip.x_hi, roll_cell(strip.cell, shift, s_vals), strip.kind)


# -- traces --------------------------------------------------------------------------


def trace_at_interface(field: MicrostructureField) -> TraceProfile:
    """u(0, .) on (0, height) rescaled to the unit interval's coordinates.

    For patterns refined without bound this is the limit trace, which the
    austenite extension also attains.
    """
    last = field.strips[-1]
    if last.kind == SLAB:
        return last.right
    if last.kind == TAIL or field.austenite.kind == TSB:
        return field.austenite.trace()
    y, v = expand_breakpoints(last.cell, field.theta, 0.0)
    if field.height != 1.0:
        y = y / field.height
    return TraceProfile.merged(y, v).simplified()
