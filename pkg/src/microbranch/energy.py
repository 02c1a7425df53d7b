"""Term-by-term evaluation of the austenite/martensite energy.

The H^{1/2} trace seminorms of a continuous piecewise-affine trace are
evaluated in closed form.  Writing the second derivative of the trace as a
sum of point masses, the Fourier (or cosine) series of the seminorm becomes a
double sum over breakpoints of the lattice sum

    C3(phi) = sum_{k >= 1} cos(k phi) / k^3,

which has a rapidly convergent expansion on [0, pi].  Truncated coefficient
series are provided as an independent route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .austenite import TSB, Austenite
from .constructions import MicrostructureField, trace_at_interface
from .params import NEUMANN, PERIODIC, ModelParams, ParameterError
from .trace import NonPeriodicTrace, TraceProfile

__all__ = [
    "EnergyBreakdown", "NonPeriodicTrace", "TraceProfile", "clausen_c3", "h12_periodic",
    "h12_neumann", "h12_periodic_series", "h12_neumann_series", "fourier_coefficients",
    "cosine_coefficients", "gagliardo", "martensite_elastic", "surface_energy",
    "vertical_variation", "asbuilt_austenite", "total_energy_km",
]

ZETA3 = float(special.zeta(3.0))

_NB = 40
_B = special.bernoulli(2 * _NB)
_C3_COEF = np.array([abs(_B[2 * n]) / (2 * n * math.factorial(2 * n + 1) * (2 * n + 2))
                     for n in range(1, _NB + 1)])


def clausen_c3(phi) -> np.ndarray:
    """sum_{k>=1} cos(k phi)/k^3 for real phi."""
    t = np.abs(np.asarray(phi, dtype=float))
    t = np.mod(t, 2.0 * math.pi)
    t = np.where(t > math.pi, 2.0 * math.pi - t, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_term = np.where(t > 0, 0.5 * t * t * np.log(t), 0.0)
    t2 = t * t
    series = np.full_like(t, _C3_COEF[-1])
    for c in _C3_COEF[-2::-1]:
        series *= t2
        series += c
    return ZETA3 + log_term - 0.75 * t2 - series * t2 * t2


def _c3_reduced(phi) -> np.ndarray:
    # constant term dropped: every weight vector used below sums to zero
    return clausen_c3(phi) - ZETA3


def _pair_sum(w: np.ndarray, x: np.ndarray, kernel, chunk: int = 512) -> float:
    # kernel is symmetric: diagonal blocks once, off-diagonal blocks twice
    total = 0.0
    for a in range(0, x.size, chunk):
        xa, wa = x[a:a + chunk], w[a:a + chunk]
        total += float(wa @ kernel(xa[:, None], xa[None, :]) @ wa)
        xb, wb = x[a + chunk:], w[a + chunk:]
        if xb.size:
            total += 2.0 * float(wa @ kernel(xa[:, None], xb[None, :]) @ wb)
    return total


def _periodic_jumps(trace: TraceProfile) -> tuple[np.ndarray, np.ndarray]:
    s = trace.slopes
    x = trace.breakpoints[:-1]
    jumps = np.empty_like(x)
    jumps[0] = s[0] - s[-1]
    jumps[1:] = s[1:] - s[:-1]
    return x, jumps


def unit_period(trace: TraceProfile, periods: int) -> TraceProfile:
    """The first of ``periods`` identical periods, rescaled to (0, 1) as N u(y / N)."""
    N = int(periods)
    if N < 1 or N != periods:
        raise ValueError("periods must be a positive integer")
    if N == 1:
        return trace
    x, v = trace.breakpoints, trace.values
    cut = 1.0 / N
    inner = x[(x > 0) & (x < cut * (1 - 1e-12))]
    xs = np.concatenate(([0.0], inner, [cut]))
    unit = TraceProfile.merged(xs * N, trace(xs) * N)
    scale = max(1.0, float(np.max(np.abs(v))))
    if not unit.is_periodic or np.max(np.abs(unit((x * N) % 1.0) / N - v)) > 1e-9 * scale:
        raise ValueError(f"trace is not {N}-fold periodic")
    return unit


def h12_periodic(trace: TraceProfile, periods: int = 1) -> float:
    """Minimal Dirichlet energy of a 1-periodic extension to the half-strip.

    Equals 2 pi sum_{k != 0} |k| |c_k|^2 for the Fourier coefficients c_k.
    With ``periods`` = N the trace repeats N times and only one period is used.
    """
    if not trace.is_periodic:
        raise NonPeriodicTrace(f"u(0)={trace.values[0]} differs from u(1)={trace.values[-1]}")
    if periods != 1:
        return h12_periodic(unit_period(trace, periods)) / periods
    x, d = _periodic_jumps(trace)
    val = _pair_sum(d, x, lambda a, b: _c3_reduced(2.0 * math.pi * (a - b))) / (4.0 * math.pi**3)
    return max(val, 0.0)


def _neumann_jumps(trace: TraceProfile) -> tuple[np.ndarray, np.ndarray]:
    s = trace.slopes
    x = trace.breakpoints
    d = np.empty_like(x)
    d[0] = s[0]
    d[-1] = -s[-1]
    d[1:-1] = s[1:] - s[:-1]
    return x, d


def _neumann_kernel(a, b):
    return _c3_reduced(math.pi * (a - b)) + _c3_reduced(math.pi * (a + b))


def h12_neumann(trace: TraceProfile, periods: int = 1) -> float:
    """Minimal Dirichlet energy of an extension with free lateral boundaries.

    Equals sum_k (pi k / 2) a_k^2 for u = a_0/2 + sum a_k cos(pi k x).
    With ``periods`` = N the trace repeats N times; pair sums then run over
    period offsets instead of all pairs of breakpoints.
    """
    if periods != 1:
        return _h12_neumann_repeated(trace, periods)
    x, d = _neumann_jumps(trace)
    val = _pair_sum(d, x, _neumann_kernel)
    return max(val / math.pi**3, 0.0)


def _h12_neumann_repeated(trace: TraceProfile, N: int) -> float:
    unit = unit_period(trace, N)
    xu, du = _periodic_jumps(unit)
    xu = xu / N
    s_last = float(unit.slopes[-1])
    # full weights: du repeated at xu + p/N, plus s_last at 0 and -s_last at 1
    dx = xu[:, None] - xu[None, :]
    sx = xu[:, None] + xu[None, :]
    ww = du[:, None] * du[None, :]
    m = np.arange(-(N - 1), N)
    diff = np.sum((N - np.abs(m))[:, None, None] * _c3_reduced(math.pi * (dx[None] + m[:, None, None] / N)) * ww)
    sidx = np.arange(0, 2 * N - 1)
    cnt = N - np.abs(sidx - (N - 1))
    summ = np.sum(cnt[:, None, None] * _c3_reduced(math.pi * (sx[None] + sidx[:, None, None] / N)) * ww)
    xp = (xu[None, :] + np.arange(N)[:, None] / N).ravel()
    wp = np.tile(du, N)
    ex = np.array([0.0, 1.0])
    we = np.array([s_last, -s_last])
    cross = float(wp @ _neumann_kernel(xp[:, None], ex[None, :]) @ we)
    ends = float(we @ _neumann_kernel(ex[:, None], ex[None, :]) @ we)
    val = diff + summ + 2.0 * cross + ends
    return max(float(val) / math.pi**3, 0.0)


# -- truncated-series route ---------------------------------------------------------


def _segment_transform(trace: TraceProfile, omega: np.ndarray) -> np.ndarray:
    """int_0^1 u(x) exp(-i omega x) dx, exact per affine segment (omega != 0)."""
    x, v = trace.breakpoints, trace.values
    beta = trace.slopes
    alpha = v[:-1] - beta * x[:-1]
    w = omega[:, None]

    def F(xx):
        return np.exp(-1j * w * xx) * ((alpha + beta * xx) / (-1j * w) + beta / w**2)

    return (F(x[1:]) - F(x[:-1])).sum(axis=1)


def fourier_coefficients(trace: TraceProfile, kmax: int) -> np.ndarray:
    """c_k = int_0^1 u exp(-2 pi i k x) dx for k = 1..kmax."""
    k = np.arange(1, kmax + 1, dtype=float)
    return _segment_transform(trace, 2.0 * math.pi * k)


def cosine_coefficients(trace: TraceProfile, kmax: int) -> np.ndarray:
    """a_k = 2 int_0^1 u cos(pi k x) dx for k = 1..kmax."""
    k = np.arange(1, kmax + 1, dtype=float)
    return 2.0 * _segment_transform(trace, math.pi * k).real


def h12_periodic_series(trace: TraceProfile, kmax: int) -> float:
    if not trace.is_periodic:
        raise NonPeriodicTrace("trace is not periodic")
    c = fourier_coefficients(trace, kmax)
    k = np.arange(1, kmax + 1)
    # |c_{-k}| = |c_k| for real traces
    return float(4.0 * math.pi * np.sum(k * np.abs(c) ** 2))


def h12_neumann_series(trace: TraceProfile, kmax: int) -> float:
    a = cosine_coefficients(trace, kmax)
    k = np.arange(1, kmax + 1)
    return float(np.sum(0.5 * math.pi * k * a**2))


# -- Gagliardo double integral -----------------------------------------------------


def _graded(trace: TraceProfile, periodic: bool) -> TraceProfile:
    """Insert breakpoints so that neighbouring pieces differ in length by at most 2.

    The integrand is bounded but kinks where two segments meet; geometric
    grading towards each breakpoint keeps tensor Gauss rules accurate when
    short and long segments are adjacent.
    """
    x = trace.breakpoints
    w = np.diff(x)
    left = np.concatenate(([w[-1] if periodic else w[0]], w[:-1]))
    right = np.concatenate((w[1:], [w[0] if periodic else w[-1]]))
    pts = [x]
    for a, b, wl, wr in zip(x[:-1], x[1:], left, right):
        half = 0.5 * (b - a)
        for end, scale, sign in ((a, min(wl, b - a), 1.0), (b, min(wr, b - a), -1.0)):
            d = scale
            while d < half:
                pts.append(np.array([end + sign * d]))
                d *= 2.0
    xs = np.unique(np.concatenate(pts))
    return TraceProfile.merged(xs, trace(xs))


def gagliardo(trace: TraceProfile, bc: str = NEUMANN, order: int = 32) -> float:
    """Double integral of |u(z1)-u(z2)|^2 times the kernel |z1-z2|^-2.

    Periodic data use the periodised kernel pi^2 / sin^2(pi (z1 - z2)), for
    which the integral is exactly 2 pi times :func:`h12_periodic`.  Each pair
    of affine segments is integrated with a tensor Gauss-Legendre rule; for
    the free kernel the singular same-segment blocks are exact.
    """
    if bc == PERIODIC and not trace.is_periodic:
        raise NonPeriodicTrace("periodic Gagliardo integral needs a periodic trace")
    trace = _graded(trace, bc == PERIODIC)
    x = trace.breakpoints
    slopes = trace.slopes
    gx, gw = np.polynomial.legendre.leggauss(order)
    lo, hi = x[:-1], x[1:]
    half = 0.5 * (hi - lo)
    pts = (0.5 * (hi + lo))[:, None] + half[:, None] * gx[None, :]  # (nseg, order)
    wts = half[:, None] * gw[None, :]
    vals = trace(pts)
    n = lo.size
    total = 0.0
    for a in range(n):
        za, ua, wa = pts[a][:, None, None], vals[a][:, None, None], wts[a][:, None, None]
        zb, ub, wb = pts[None, :, :], vals[None, :, :], wts[None, :, :]
        diff = za - zb
        num = (ua - ub) ** 2
        if bc == PERIODIC:
            with np.errstate(divide="ignore", invalid="ignore"):
                block = num * (math.pi / np.sin(math.pi * diff)) ** 2
            d = diff[:, a, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(d == 0, 1.0, math.pi * d / np.sin(math.pi * d))
            block[:, a, :] = slopes[a] ** 2 * ratio**2
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                block = num / diff**2
            block[:, a, :] = slopes[a] ** 2
        block = np.nan_to_num(block, nan=0.0, posinf=0.0)
        total += float(np.sum(block * wa * wb))
    return total


# -- martensite terms ---------------------------------------------------------------


def _require_sharp(field: MicrostructureField) -> None:
    if field.has_slab:
        raise ParameterError("the two-slope energy is undefined on interpolation slabs")


def martensite_elastic(field: MicrostructureField) -> float:
    """Exact integral of (d(u)/d(x1))^2 over the martensite strip."""
    _require_sharp(field)
    total = 0.0
    for strip, integ in field.integrators():
        total += integ.summary(strip.cell).gamma
    if field.tail is not None:
        total += field.tail.elastic
    if not math.isfinite(total):
        raise FloatingPointError("non-finite elastic energy")
    return total


def surface_energy(field: MicrostructureField, eps: float) -> float:
    """eps times the total horizontal extent of the interfaces (unit jumps)."""
    _require_sharp(field)
    return eps * field.projections()[0]


def vertical_variation(field: MicrostructureField) -> float:
    """Total vertical extent of the interfaces, i.e. the variation of d1 d2 u."""
    _require_sharp(field)
    return field.projections()[1]


# -- austenite terms ----------------------------------------------------------------

def asbuilt_austenite(aus: Austenite, panels: int | None = None, rtol: float = 1e-5) -> float:
    """Dirichlet energy of the stored extension by quadrature (without mu).

    Each x1-slice is integrated piecewise with Gauss rules that are exact for
    the polynomial pieces; the x1-integral is adaptive (``rtol``) or, when
    ``panels`` is given, a composite 3-point Gauss rule with that many panels.
    """
    if aus.kind == "zero":
        return 0.0
    scale = 1.0
    if aus.kind == TSB and (aus.N != 1 or aus.shift):
        # every period carries the same energy; integrate one and rescale
        scale = 1.0 / aus.N
        aus = Austenite(TSB, aus.theta, 1, aus.h, 0.0)
    a, b = 0.0, aus.support
    if b <= 0:
        return 0.0
    if panels is None:
        val, _ = integrate.quad(lambda t: aus.slice_energy(t), a, b, epsrel=rtol, epsabs=0.0, limit=200)
    else:
        edges = np.linspace(a, b, panels + 1)
        val = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            for xg, wg in zip(*np.polynomial.legendre.leggauss(3)):
                val += half * wg * aus.slice_energy(0.5 * (hi + lo) + half * xg)
    return scale * val


@dataclass(frozen=True)
class EnergyBreakdown:
    """Named energy terms; serialises to a flat map or a ``term,value`` CSV."""

    terms: dict = field(default_factory=dict)

    def __getattr__(self, name: str):
        terms = object.__getattribute__(self, "terms")
        if name in terms:
            return terms[name]
        raise AttributeError(name)

    def __getitem__(self, name: str) -> float:
        return self.terms[name]

    def as_dict(self) -> dict:
        return dict(self.terms)

    def to_csv(self) -> str:
        lines = ["term,value"]
        lines += [f"{k},{v:.17g}" for k, v in self.terms.items()]
        return "\n".join(lines) + "\n"

    def check_finite(self) -> None:
        bad = [k for k, v in self.terms.items() if not math.isfinite(v)]
        if bad:
            raise FloatingPointError(f"non-finite energy terms: {', '.join(bad)}")


def _trace_periods(field: MicrostructureField, trace: TraceProfile) -> int:
    aus = field.austenite
    if aus.kind != TSB or aus.N == 1 or aus.shift:
        return 1
    try:
        unit_period(trace, aus.N)
    except ValueError:
        return 1
    return aus.N


def total_energy_km(field: MicrostructureField, params: ModelParams,
                    panels: int | None = None) -> EnergyBreakdown:
    """All terms of the two-slope energy for a field on the unit-height strip."""
    if field.bc != params.bc:
        raise ParameterError(f"field bc {field.bc!r} does not match params bc {params.bc!r}")
    if field.height != 1.0 or abs(field.L - params.L) > 1e-12 * params.L:
        raise ParameterError("field domain does not match params")
    if field.theta != params.theta:
        raise ParameterError("field theta does not match params")
    elastic = martensite_elastic(field)
    surface = surface_energy(field, params.eps)
    trace = trace_at_interface(field)
    periods = _trace_periods(field, trace)
    semi = h12_periodic(trace, periods) if params.bc == PERIODIC else h12_neumann(trace, periods)
    aus_opt = params.mu * semi
    aus_built = params.mu * asbuilt_austenite(field.austenite, panels)
    out = EnergyBreakdown({
        "martensite_elastic": elastic,
        "surface": surface,
        "austenite_optimal": aus_opt,
        "austenite_asbuilt": aus_built,
        "total_optimal": elastic + surface + aus_opt,
        "total_asbuilt": elastic + surface + aus_built,
    })
    out.check_finite()
    return out
