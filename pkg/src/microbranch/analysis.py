"""Parameter sweeps: regime maps, exponent fits and construction audits."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constructions import build_single_laminate, build_tsb, build_uniform
from .energy import total_energy_km
from .oracle import brute_force_minimize  # noqa: F401  (re-exported)
from .params import (BRANCHING, LAMINATE, NEUMANN, PERIODIC, TRUNCATED, TWO_SCALE, UNIFORM,
                     ModelParams, ParameterError, family_construction_params, scaling_km,
                     scaling_plastic)

KM = "km"
PLASTIC = "plastic"
AXIS_NAMES = ("mu", "eps_hat", "L", "theta")

FAMILIES = {
    "branching": BRANCHING,
    "laminate": LAMINATE,
    "truncated": TRUNCATED,
    "tsb": TWO_SCALE,
    "uniform": UNIFORM,
    "single_laminate": "SingleLaminate",
}


@dataclass(frozen=True)
class Axis:
    """``n`` log-spaced samples of ``name`` from ``lo`` to ``hi`` inclusive."""

    name: str
    lo: float
    hi: float
    n: int

    def __post_init__(self) -> None:
        if self.name not in AXIS_NAMES:
            raise ParameterError(f"unknown sweep parameter {self.name!r}; use one of {AXIS_NAMES}")
        if not (self.lo > 0 and self.hi > 0 and math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ParameterError(f"range of {self.name} must be positive and finite")
        if int(self.n) != self.n or self.n < 2:
            raise ParameterError(f"sample count of {self.name} must be an integer >= 2")

    @property
    def values(self) -> np.ndarray:
        return np.geomspace(self.lo, self.hi, int(self.n))

    @classmethod
    def parse(cls, name: str, text: str) -> "Axis":
        """Parse the ``a:b:n`` range syntax."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ParameterError(f"range for {name} must look like a:b:n, got {text!r}")
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ParameterError(f"bad range for {name}: {text!r}") from exc
        return cls(name, lo, hi, n)


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple[Axis, ...]
    fixed: dict = field(default_factory=dict)
    bc: str = NEUMANN
    model: str = KM

    def __post_init__(self) -> None:
        if not self.axes:
            raise ParameterError("sweep needs at least one axis")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ParameterError("sweep axes must be distinct")
        if self.model not in (KM, PLASTIC):
            raise ParameterError(f"model must be {KM!r} or {PLASTIC!r}")
        if self.bc not in (NEUMANN, PERIODIC):
            raise ParameterError(f"unknown bc {self.bc!r}")
        missing = [n for n in AXIS_NAMES if n not in names and n not in self.fixed]
        if missing:
            raise ParameterError(f"missing fixed parameters: {', '.join(missing)}")
        for k in self.fixed:
            if k not in AXIS_NAMES:
                raise ParameterError(f"unknown fixed parameter {k!r}")
            if k in names:
                raise ParameterError(f"{k} is both swept and fixed")

    def points(self) -> list[dict]:
        grids = np.meshgrid(*[a.values for a in self.axes], indexing="ij")
        out = []
        for idx in np.ndindex(grids[0].shape):
            p = dict(self.fixed)
            for a, g in zip(self.axes, grids):
                p[a.name] = float(g[idx])
            out.append(p)
        return out

    def params(self, point: dict) -> ModelParams:
        return ModelParams.from_eps_hat(point["eps_hat"], point["mu"], point["L"], point["theta"],
                                        bc=self.bc, model=self.model)


def thread_count(threads: int | None = None) -> int:
    """Explicit value, else MICROBRANCH_THREADS, else the machine's CPU count."""
    if threads is not None:
        if threads < 1:
            raise ParameterError("thread count must be >= 1")
        return threads
    env = os.environ.get("MICROBRANCH_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ParameterError(f"MICROBRANCH_THREADS={env!r} is not an integer") from exc
        if n < 1:
            raise ParameterError("MICROBRANCH_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def _map(fn, items, threads: int | None):
    n = thread_count(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))  # results keep input order


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# -- phase diagram -------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseDiagram:
    spec: SweepSpec
    rows: tuple[tuple[float, float, str, float], ...]  # (axis 0, axis 1, regime, value)

    @property
    def names(self) -> tuple[str, str]:
        return self.spec.axes[0].name, self.spec.axes[1].name

    def labels(self) -> np.ndarray:
        a, b = self.spec.axes
        return np.array([r[2] for r in self.rows], dtype=object).reshape(a.n, b.n)

    def regimes(self) -> set[str]:
        return {r[2] for r in self.rows}

    def to_csv(self) -> str:
        x, y = self.names
        lines = [f"{x},{y},regime,value"]
        lines += [f"{fmt(a)},{fmt(b)},{r},{fmt(v)}" for a, b, r, v in self.rows]
        return "\n".join(lines) + "\n"


def phase_diagram(spec: SweepSpec, threads: int | None = None) -> PhaseDiagram:
    """Predicted regime and minimal-energy value at every point of a two-axis sweep."""
    if len(spec.axes) != 2:
        raise ParameterError("a phase diagram needs exactly two axes")
    predict = scaling_km if spec.model == KM else scaling_plastic
    x, y = spec.axes[0].name, spec.axes[1].name

    def one(point: dict):
        pred = predict(spec.params(point))
        return (point[x], point[y], pred.regime, pred.value)

    return PhaseDiagram(spec, tuple(_map(one, spec.points(), threads)))


def label_changes(labels: np.ndarray) -> int:
    """Largest number of label changes along any row or column of a regime map."""
    worst = 0
    for arr in (labels, labels.T):
        for line in arr:
            worst = max(worst, sum(1 for a, b in zip(line[:-1], line[1:]) if a != b))
    return worst


# -- constructions -------------------------------------------------------------------


def family_field(family: str, params: ModelParams):
    """Construction of one family with internal parameters tuned to ``params``."""
    if family not in FAMILIES:
        raise ParameterError(f"unknown family {family!r}; use one of {sorted(FAMILIES)}")
    if family == "uniform":
        if params.bc == PERIODIC:
            raise ParameterError("the uniform field is not periodic")
        return build_uniform(params.theta, params.L)
    if family == "single_laminate":
        return build_single_laminate(params.theta, params.L, params.bc)
    if family == "truncated" and params.bc == PERIODIC:
        raise ParameterError("truncated branching is a Neumann construction")
    return build_tsb(family_construction_params(FAMILIES[family], params), params)


def applicable_families(bc: str) -> tuple[str, ...]:
    if bc == NEUMANN:
        return ("uniform", "single_laminate", "laminate", "branching", "truncated", "tsb")
    return ("single_laminate", "laminate", "branching", "tsb")


@dataclass(frozen=True)
class Comparison:
    params: ModelParams
    energies: dict  # family -> total energy with the optimal austenite term
    prediction: float
    regime: str

    @property
    def best(self) -> str:
        return min(self.energies, key=lambda k: (self.energies[k], k))

    @property
    def ratio(self) -> float:
        return self.energies[self.best] / self.prediction

    def to_csv(self) -> str:
        lines = ["family,energy_total,ratio_to_prediction"]
        for k in sorted(self.energies):
            lines.append(f"{k},{fmt(self.energies[k])},{fmt(self.energies[k] / self.prediction)}")
        return "\n".join(lines) + "\n"


def compare_constructions(params: ModelParams) -> Comparison:
    """Energies of every construction admissible for the boundary conditions."""
    pred = scaling_km(params)
    energies = {}
    for fam in applicable_families(params.bc):
        energies[fam] = total_energy_km(family_field(fam, params), params).total_optimal
    return Comparison(params, energies, pred.value, pred.regime)


# -- exponent fits -------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    param: str
    family: str
    slope: float
    intercept: float
    residual: float
    rows: tuple[tuple[float, float, float, float, float], ...]  # value, total, elastic, surface, austenite

    def to_csv(self) -> str:
        lines = ["param,value,energy_total,energy_elastic,energy_surface,energy_austenite"]
        for v, t, e, s, a in self.rows:
            lines.append(f"{self.param},{fmt(v)},{fmt(t)},{fmt(e)},{fmt(s)},{fmt(a)}")
        return "\n".join(lines) + "\n"


def log_fit(x, y) -> tuple[float, float, float]:
    """Least-squares line through (log x, log y): slope, intercept, RMS residual."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res**2)))


def scaling_fit(spec: SweepSpec, family: str, threads: int | None = None) -> FitResult:
    """Slope of log(total energy) against log of the single swept parameter."""
    if len(spec.axes) != 1:
        raise ParameterError("a scaling fit sweeps exactly one parameter")
    axis = spec.axes[0]
    if axis.n < 3:
        raise ParameterError("a scaling fit needs at least 3 points")
    if spec.model != KM:
        raise ParameterError("scaling fits use the martensite model")

    def one(point: dict):
        p = spec.params(point)
        e = total_energy_km(family_field(family, p), p)
        return (point[axis.name], e.total_optimal, e.martensite_elastic, e.surface, e.austenite_optimal)

    rows = tuple(_map(one, spec.points(), threads))
    slope, icpt, res = log_fit([r[0] for r in rows], [r[1] for r in rows])
    return FitResult(axis.name, family, slope, icpt, res, rows)
