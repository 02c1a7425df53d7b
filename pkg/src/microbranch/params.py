"""Model parameters, closed-form energy scaling laws and regime classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

NEUMANN = "neumann"
PERIODIC = "periodic"
BOUNDARY_CONDITIONS = (NEUMANN, PERIODIC)

# Regime labels.
UNIFORM = "Uniform"
LAMINATE = "Laminate"
SINGLE_LAMINATE_FLOOR = "SingleLaminateFloor"
BRANCHING = "Branching"
TWO_SCALE = "TwoScaleBranching"
TRUNCATED = "TruncatedBranching"
CONSTANT = "Constant"

REGIMES = (UNIFORM, LAMINATE, SINGLE_LAMINATE_FLOOR, BRANCHING, TWO_SCALE, TRUNCATED, CONSTANT)

# Lower index wins ties between equal competing terms.
PRECEDENCE = (BRANCHING, TRUNCATED, TWO_SCALE, LAMINATE, UNIFORM, CONSTANT)


class ParameterError(ValueError):
    """Raised for parameters outside the admissible range."""


def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ParameterError(f"{name} must be a finite positive number, got {value!r}")


def _check_theta(theta: float) -> None:
    if not (isinstance(theta, (int, float)) and 0.0 < theta <= 0.5):
        raise ParameterError(f"theta must lie in (0, 1/2], got {theta!r}")


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of both energies.

    ``eps`` is the surface (or line-tension) energy density, ``mu`` the
    austenite/exterior elastic modulus ratio, ``L`` the martensite depth (or
    grain edge length) and ``theta`` the minority volume fraction.
    """

    eps: float
    mu: float
    L: float
    theta: float
    bc: str = NEUMANN

    def __post_init__(self) -> None:
        _check_positive(eps=self.eps, mu=self.mu, L=self.L)
        _check_theta(self.theta)
        if self.bc not in BOUNDARY_CONDITIONS:
            raise ParameterError(f"bc must be one of {BOUNDARY_CONDITIONS}, got {self.bc!r}")

    @property
    def eps_hat(self) -> float:
        """Rescaled surface energy for the martensite model."""
        return self.eps / self.theta**2

    @property
    def eps_hat_plastic(self) -> float:
        """Rescaled line tension for the plasticity model."""
        return self.eps / (self.L * self.theta**2)

    @classmethod
    def from_eps_hat(cls, eps_hat: float, mu: float, L: float, theta: float,
                     bc: str = NEUMANN, model: str = "km") -> "ModelParams":
        _check_positive(eps_hat=eps_hat)
        _check_theta(theta)
        eps = eps_hat * theta**2 if model == "km" else eps_hat * L * theta**2
        return cls(eps=eps, mu=mu, L=L, theta=theta, bc=bc)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class RegimePrediction:
    value: float
    regime: str
    terms: tuple[tuple[str, float], ...]
    model: str = "km"
    bc: str = NEUMANN
    # For periodic data the regime of the inner minimum, which fixes the construction.
    inner_regime: str | None = None
    prefactor: float = 1.0
    params: ModelParams | None = field(default=None, compare=False)

    def term(self, label: str) -> float:
        for name, value in self.terms:
            if name == label:
                return value
        raise KeyError(label)

    def as_dict(self) -> dict:
        out = {
            "model": self.model,
            "bc": self.bc,
            "value": self.value,
            "regime": self.regime,
            "prefactor": self.prefactor,
            "terms": {name: value for name, value in self.terms},
        }
        if self.inner_regime is not None:
            out["inner_regime"] = self.inner_regime
        return out


def _argmin(terms: list[tuple[str, float]]) -> tuple[str, float]:
    best = min(value for _, value in terms)
    tied = [name for name, value in terms if value == best]
    tied.sort(key=PRECEDENCE.index)
    return tied[0], best


def km_terms(eps_hat: float, mu: float, L: float, theta: float, bc: str = NEUMANN) -> list[tuple[str, float]]:
    """Competing terms of the martensite scaling law, without the theta^2 prefactor."""
    x = eps_hat / (mu**3 * L)
    lam_tsb = math.sqrt(eps_hat * L * mu * math.log(3.0 + x))
    lam = math.sqrt(eps_hat * L * mu * math.log(1.0 / theta))
    terms = [(BRANCHING, eps_hat ** (2.0 / 3.0) * L ** (1.0 / 3.0))]
    if bc == NEUMANN:
        terms.append((TRUNCATED, math.sqrt(eps_hat)))
    terms += [(TWO_SCALE, lam_tsb), (LAMINATE, lam)]
    if bc == NEUMANN:
        terms.append((UNIFORM, mu))
    return terms


def scaling_km(params: ModelParams) -> RegimePrediction:
    """Closed-form minimal-energy prediction for the austenite/martensite model.

    Neumann data use the five-term minimum; periodic data take the maximum
    of ``eps_hat * L`` and the three-term minimum.
    """
    th, L, mu = params.theta, params.L, params.mu
    eh = params.eps_hat
    terms = km_terms(eh, mu, L, th, params.bc)
    label, inner = _argmin(terms)
    pref = th**2
    if params.bc == NEUMANN:
        return RegimePrediction(pref * inner, label, tuple(terms), "km", NEUMANN,
                                prefactor=pref, params=params)
    floor = eh * L
    all_terms = tuple(terms) + ((SINGLE_LAMINATE_FLOOR, floor),)
    # Ties in the outer maximum go to the inner regime.
    regime = SINGLE_LAMINATE_FLOOR if floor > inner else label
    return RegimePrediction(pref * max(floor, inner), regime, all_terms, "km", PERIODIC,
                            inner_regime=label, prefactor=pref, params=params)


def scaling_plastic(params: ModelParams) -> RegimePrediction:
    """Closed-form prediction for the crystal-plasticity model (bc is ignored)."""
    th, L, mu = params.theta, params.L, params.mu
    eh = params.eps_hat_plastic
    terms = [
        (BRANCHING, eh ** (2.0 / 3.0)),
        (TWO_SCALE, math.sqrt(eh * mu * math.log(3.0 + eh / mu**3))),
        (LAMINATE, math.sqrt(eh * mu * math.log(1.0 / th))),
        (UNIFORM, mu),
        (CONSTANT, 1.0),
    ]
    label, best = _argmin(terms)
    pref = L**3 * th**2
    return RegimePrediction(pref * best, label, tuple(terms), "plastic", params.bc,
                            prefactor=pref, params=params)


def optimal_h(theta: float, mu: float, L: float, N: int) -> float:
    """Height fraction of the branching bands that balances the bounds."""
    _check_theta(theta)
    _check_positive(mu=mu, L=L)
    if int(N) != N or N < 1:
        raise ParameterError(f"N must be an integer >= 1, got {N!r}")
    return min(1.0, max(theta, mu * L * N))


@dataclass(frozen=True)
class ConstructionParams:
    """Internal parameters of the two-scale branching family.

    ``N`` periods of height ``1/N``; branching bands of relative height ``h``
    refined over a depth ``ell``; optional finite refinement level.
    """

    N: int
    h: float
    ell: float
    theta: float
    L: float
    bc: str = NEUMANN
    truncation_level: int | None = None
    # Set by regime_construction_params for patterns without interfaces.
    uniform: bool = False

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError(f"N must be an integer >= 1, got {self.N!r}")
        _check_theta(self.theta)
        _check_positive(ell=self.ell, L=self.L)
        if not (self.theta <= self.h <= 1.0):
            raise ParameterError(f"h must lie in [theta, 1], got {self.h!r}")
        if self.ell > self.L * (1 + 1e-12):
            raise ParameterError(f"ell={self.ell} exceeds L={self.L}")
        if self.N > 1 and self.ell < self.L * (1 - 1e-12):
            raise ParameterError("ell < L is only allowed for N = 1")
        if self.bc not in BOUNDARY_CONDITIONS:
            raise ParameterError(f"unknown bc {self.bc!r}")
        if self.truncation_level is not None:
            I = self.truncation_level
            if int(I) != I or I < 0:
                raise ParameterError("truncation_level must be a non-negative integer")
            target = self.N * self.ell / self.theta
            ratio = 1.5**I / target
            if not (0.5 <= ratio <= 2.0):
                raise ParameterError(
                    f"truncation level {I} gives (3/2)^I={1.5**I:.4g}, not within a factor 2 "
                    f"of N*ell/theta={target:.4g}")

    @property
    def level_count(self) -> int | None:
        return self.truncation_level


def truncation_level_for(N: int, ell: float, theta: float) -> int:
    """Smallest-error integer level with (3/2)^I close to N*ell/theta."""
    target = N * ell / theta
    return max(0, int(round(math.log(target) / math.log(1.5))))


def _round_N(value: float) -> int:
    return max(1, int(round(value)))


def _tsb_h(params: ModelParams) -> float:
    th, L, mu, eh = params.theta, params.L, params.mu, params.eps_hat
    log3 = math.log(3.0 + eh / (mu**3 * L))
    raw = math.sqrt(L) * mu**1.5 * math.sqrt(log3) / math.sqrt(eh)
    return min(1.0, max(th, raw))


def _make(params: ModelParams, N: int, h: float, ell: float, **kw) -> ConstructionParams:
    return ConstructionParams(N=N, h=h, ell=min(ell, params.L), theta=params.theta, L=params.L,
                              bc=params.bc, **kw)


def family_construction_params(label: str, params: ModelParams) -> ConstructionParams:
    """Internal (N, h, ell) of the construction for regime ``label``, whatever regime is predicted.

    Asymptotic period counts use the constant 1 and are rounded to the
    nearest integer (at least 1); ``h`` is clamped to ``[theta, 1]``.
    """
    th, L, mu, eh = params.theta, params.L, params.mu, params.eps_hat
    if label == BRANCHING:
        return _make(params, _round_N((eh * L**2) ** (-1.0 / 3.0)), 1.0, L)
    if label == LAMINATE:
        return _make(params, _round_N(math.sqrt(mu * math.log(1.0 / th**2) / (eh * L))), th, L)
    if label == TWO_SCALE:
        log3 = math.log(3.0 + eh / (mu**3 * L))
        return _make(params, _round_N(math.sqrt(mu * log3 / (eh * L))), _tsb_h(params), L)
    if label == TRUNCATED:
        return _make(params, 1, 1.0, min(L, eh**-0.5))
    if label == UNIFORM:
        return _make(params, 1, 1.0, L, uniform=True)
    raise ParameterError(f"no construction for regime {label}")


def regime_construction_params(prediction: RegimePrediction, params: ModelParams) -> ConstructionParams:
    """Internal parameters of the construction realising a predicted regime.

    For periodic data in the single-laminate floor the pattern of the inner
    regime is used with one period over a reduced depth.
    """
    if prediction.model != "km" or prediction.bc != params.bc:
        raise ParameterError("prediction was not produced by scaling_km for these params")
    if prediction.params is not None and prediction.params != params:
        raise ParameterError("prediction was made for different params")
    check = scaling_km(params)
    if check.value != prediction.value or check.regime != prediction.regime:
        raise ParameterError("prediction does not match params")
    th, L, mu, eh = params.theta, params.L, params.mu, params.eps_hat
    if params.bc == NEUMANN or prediction.regime != SINGLE_LAMINATE_FLOOR:
        return family_construction_params(prediction.inner_regime or prediction.regime, params)
    inner = prediction.inner_regime
    if inner == BRANCHING:
        return _make(params, 1, 1.0, min(L, eh**-0.5))
    if inner == LAMINATE:
        return _make(params, 1, th, L)
    log3 = math.log(3.0 + eh / (mu**3 * L))
    return _make(params, 1, _tsb_h(params), min(L, mu * log3 / eh))
