"""Closed-form extensions of a martensite trace into the austenite half-strip x1 >= 0."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trace import TraceProfile

ZERO = "zero"
RAMP = "ramp"
SINGLE_LAMINATE = "single_laminate"
TSB = "tsb"
KINDS = (ZERO, RAMP, SINGLE_LAMINATE, TSB)

_G3X, _G3W = np.polynomial.legendre.leggauss(3)


@dataclass(frozen=True)
class Austenite:
    """Explicit extension ``u(x1, x2)`` for ``x1 >= 0``.

    ``zero``: u = 0.  ``ramp``: (1 - x1) theta x2 on [0, 1].
    ``single_laminate``: fan joining the one-stripe trace to zero at x1 = 1.
    ``tsb``: wedge fan of the two-scale pattern, rescaled to ``N`` periods and
    optionally shifted by half a period in x2.
    """

    kind: str = ZERO
    theta: float = 0.0
    N: int = 1
    h: float = 1.0
    shift: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown austenite kind {self.kind!r}")
        if self.kind == TSB and self.shift not in (0.0, 0.5):
            raise ValueError("tsb extension supports shifts 0 and 1/2 only")

    @property
    def params(self) -> dict:
        if self.kind == ZERO:
            return {}
        if self.kind in (RAMP, SINGLE_LAMINATE):
            return {"theta": self.theta}
        return {"theta": self.theta, "N": self.N, "h": self.h, "shift": self.shift}

    @property
    def support(self) -> float:
        """u vanishes for x1 beyond this abscissa."""
        if self.kind == ZERO:
            return 0.0
        if self.kind == TSB:
            return (1.0 - self.h) / (2.0 * self.N)
        return 1.0

    # -- pointwise formulas -------------------------------------------------

    def _unit_tsb(self, X, Y):
        th, h = self.theta, self.h
        s = 2.0 * X + h
        lo = 0.5 * (1.0 - s)
        hi = 0.5 * (1.0 + s)
        beyond = X >= 0.5 * (1.0 - h)
        with np.errstate(divide="ignore", invalid="ignore"):
            wedge_v = th * (1.0 - 1.0 / s) * (Y - 0.5)
            wedge_g1 = th * 2.0 / s**2 * (Y - 0.5)
            wedge_g2 = th * (1.0 - 1.0 / s)
        below = Y <= lo
        above = Y >= hi
        v = np.where(below, th * Y, np.where(above, th * (Y - 1.0), wedge_v))
        g1 = np.where(below | above, 0.0, wedge_g1)
        g2 = np.where(below | above, th, wedge_g2)
        v = np.where(beyond, 0.0, v)
        g1 = np.where(beyond, 0.0, g1)
        g2 = np.where(beyond, 0.0, g2)
        return v, g1, g2

    def _eval(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        x1, x2 = np.broadcast_arrays(x1, x2)
        th = self.theta
        if self.kind == ZERO:
            z = np.zeros(x1.shape)
            return z, z.copy(), z.copy()
        if self.kind == RAMP:
            inside = x1 <= 1.0
            v = np.where(inside, (1.0 - x1) * th * x2, 0.0)
            g1 = np.where(inside, -th * x2, 0.0)
            g2 = np.where(inside, th * (1.0 - x1), 0.0)
            return v, g1, g2
        if self.kind == SINGLE_LAMINATE:
            inside = x1 <= 1.0
            s = (1.0 - th) * np.minimum(x1, 1.0) + th
            fan = x2 <= s
            v = np.where(fan, th * x2 * (1.0 - 1.0 / s), th * (x2 - 1.0))
            g1 = np.where(fan, th * x2 * (1.0 - th) / s**2, 0.0)
            g2 = np.where(fan, th * (1.0 - 1.0 / s), th)
            return (np.where(inside, v, 0.0), np.where(inside, g1, 0.0),
                    np.where(inside, g2, 0.0))
        N = self.N
        Y = np.mod(N * x2 + self.shift, 1.0)
        v, g1, g2 = self._unit_tsb(N * x1, Y)
        return v / N, g1, g2

    def value(self, x1, x2):
        return self._eval(x1, x2)[0]

    def gradient(self, x1, x2):
        _, g1, g2 = self._eval(x1, x2)
        return g1, g2

    def x2_breaks(self, x1: float) -> np.ndarray:
        """x2 positions on [0, 1] where the formula changes at abscissa ``x1``."""
        if self.kind in (ZERO, RAMP):
            return np.array([0.0, 1.0])
        if self.kind == SINGLE_LAMINATE:
            s = (1.0 - self.theta) * min(x1, 1.0) + self.theta
            return np.unique(np.clip([0.0, s, 1.0], 0.0, 1.0))
        N, h = self.N, self.h
        s = min(2.0 * N * x1 + h, 1.0)
        pts = [0.0, 1.0]
        for k in range(N):
            for y in (0.5 * (1 - s), 0.5 * (1 + s), 0.5, 0.0):
                pts.append((k + y - self.shift) / N)
        pts = np.mod(np.asarray(pts), 1.0)
        return np.unique(np.clip(np.concatenate((pts, [0.0, 1.0])), 0.0, 1.0))

    # -- energies -----------------------------------------------------------

    def slice_energy(self, x1: float) -> float:
        """int_0^1 |grad u(x1, x2)|^2 dx2, Gauss rules exact on each polynomial piece."""
        br = self.x2_breaks(x1)
        lo, hi = br[:-1], br[1:]
        keep = hi > lo
        lo, hi = lo[keep], hi[keep]
        half = 0.5 * (hi - lo)
        y = (0.5 * (hi + lo))[:, None] + half[:, None] * _G3X[None, :]
        g1, g2 = self.gradient(np.full(y.shape, x1), y)
        return float(np.sum((g1**2 + g2**2) * half[:, None] * _G3W[None, :]))

    def closed_form_energy(self) -> float:
        """Exact Dirichlet energy of the extension over x1 >= 0 (without mu)."""
        th = self.theta
        if self.kind == ZERO:
            return 0.0
        if self.kind == RAMP:
            return 2.0 * th**2 / 3.0
        if self.kind == SINGLE_LAMINATE:
            return th**2 / (1 - th) * ((1 + (1 - th) ** 2 / 3.0) * math.log(1 / th) - (1 - th))
        h = self.h
        return th**2 / (2.0 * self.N) * (4.0 / 3.0 * math.log(1.0 / h) - (1.0 - h))

    def trace(self) -> TraceProfile:
        """u(0, .) on [0, 1]."""
        th = self.theta
        if self.kind == ZERO:
            return TraceProfile(np.array([0.0, 1.0]), np.array([0.0, 0.0]))
        if self.kind == RAMP:
            return TraceProfile(np.array([0.0, 1.0]), np.array([0.0, th]))
        if self.kind == SINGLE_LAMINATE:
            return TraceProfile(np.array([0.0, th, 1.0]), np.array([0.0, (th - 1.0) * th, 0.0]))
        return tsb_limit_trace(self.N, self.h, th, self.shift)


def tsb_limit_trace(N: int, h: float, theta: float, shift: float = 0.0) -> TraceProfile:
    """Trace of the fully refined two-scale pattern: slope theta outside, theta(1-1/h) in the bands."""
    g = 0.5 * (1.0 - h)
    unit_x = np.array([0.0, g, g + h, 1.0])
    unit_v = np.array([0.0, theta * g, theta * (g + h) - theta, 0.0])
    if shift:
        # rolled by half a period: band halves at both ends, U(1/2) = 0
        v1 = 0.5 * theta * (h - 1.0)
        unit_x = np.array([0.0, h / 2, 1.0 - h / 2, 1.0])
        unit_v = np.array([0.0, v1, v1 + theta * (1.0 - h), 0.0])
    xs = np.concatenate([(k + unit_x[:-1]) / N for k in range(N)] + [np.array([1.0])])
    vs = np.concatenate([unit_v[:-1] / N for _ in range(N)] + [np.array([0.0])])
    return TraceProfile.merged(xs, vs)
