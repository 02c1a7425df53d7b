"""Piecewise-affine boundary traces on (0, 1)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonPeriodicTrace(ValueError):
    """The trace takes different values at the two ends of the interval."""


@dataclass(frozen=True, eq=False)
class TraceProfile:
    """Continuous piecewise-affine function given by its breakpoints and values."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2:
            raise ValueError("breakpoints and values must be 1-D arrays of equal length >= 2")
        if x[0] != 0.0 or x[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(x) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("trace values must be finite")
        object.__setattr__(self, "breakpoints", x)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, f, n: int) -> "TraceProfile":
        x = np.linspace(0.0, 1.0, n + 1)
        return cls(x, np.asarray(f(x), dtype=float))

    @classmethod
    def merged(cls, x, v, tol: float = 1e-15) -> "TraceProfile":
        """Build from possibly repeated breakpoints, dropping zero-length pieces."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        keep = np.concatenate(([True], np.diff(x) > tol))
        x, v = x[keep], v[keep]
        x[0], x[-1] = 0.0, 1.0
        return cls(x, v)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    @property
    def is_periodic(self) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.values))))
        return abs(self.values[0] - self.values[-1]) <= 1e-12 * scale

    def __call__(self, x):
        return np.interp(x, self.breakpoints, self.values)

    def shifted(self, c: float) -> "TraceProfile":
        return TraceProfile(self.breakpoints, self.values + c)

    def simplified(self, rtol: float = 1e-12) -> "TraceProfile":
        """Drop breakpoints where the slope does not change."""
        s = self.slopes
        scale = max(1.0, float(np.max(np.abs(s))))
        keep = np.ones(self.breakpoints.size, dtype=bool)
        keep[1:-1] = np.abs(np.diff(s)) > rtol * scale
        return TraceProfile(self.breakpoints[keep], self.values[keep])

    def rolled(self, shift: float) -> "TraceProfile":
        """Periodic trace w(y) = u((y + shift) mod 1) - u(shift)."""
        if not self.is_periodic:
            raise NonPeriodicTrace("only periodic traces can be rolled")
        shift = shift % 1.0
        x, v = self.breakpoints, self.values
        u_s = float(self(shift))
        hi = x > shift
        lo = x < shift
        xs = np.concatenate(([0.0], x[hi] - shift, x[1:][lo[1:]] + 1.0 - shift, [1.0]))
        vs = np.concatenate(([0.0], v[hi] - u_s, v[1:][lo[1:]] - u_s, [0.0]))
        order = np.argsort(xs, kind="stable")
        return TraceProfile.merged(xs[order], vs[order])
