from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from microbranch.constructions import CELLS, build_uniform
from microbranch.params import BRANCHING, LAMINATE, TWO_SCALE, UNIFORM, ParameterError
from microbranch.plasticity import (E_ETA, E_XI, PLASTIC_REGIMES, TRIVIAL, PlasticParams, VKMProfile,
                                    build_vkm, grid_energy, lift_km_to_3d, plastic_energy,
                                    signed_distance, step0_trivial, step0_uniform)

LIFTS = (LAMINATE, BRANCHING, TWO_SCALE)

thetas = st.floats(0.02, 0.5)
eps_hats = st.floats(1e-4, 10.0)
mus = st.floats(1e-3, 10.0)
sizes = st.floats(0.2, 5.0)


def lifted(regime: str, p: PlasticParams):
    v = build_vkm(regime, p)
    return lift_km_to_3d(v, v.T, p)


def state_for(regime: str, p: PlasticParams):
    if regime == TRIVIAL:
        return step0_trivial(p)
    if regime == UNIFORM:
        return step0_uniform(p)
    return lifted(regime, p)


def grain_points(n: int, L: float, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, L, size=(n, 3))


# -- parameters ----------------------------------------------------------------------


def test_slip_directions():
    e2 = np.array([0.0, 1.0, 0.0])
    assert np.allclose(E_XI - math.sqrt(2) * e2, E_ETA, atol=1e-15)
    assert np.dot(E_XI, E_ETA) == pytest.approx(0.0, abs=1e-16)


def test_params_rescaling():
    p = PlasticParams.from_eps_hat(0.3, 0.7, 0.2, L=4.0)
    assert p.eps == pytest.approx(0.3 * 4.0 * 0.04, rel=1e-15)
    assert p.eps_hat == pytest.approx(0.3, rel=1e-15)
    u = p.unit()
    assert (u.L, u.mu, u.theta) == (1.0, 0.7, 0.2)
    assert u.eps_hat == pytest.approx(0.3, rel=1e-15)


@pytest.mark.parametrize("kw", [dict(eps=0.0, mu=1.0, theta=0.2), dict(eps=1.0, mu=-1.0, theta=0.2),
                                dict(eps=1.0, mu=1.0, theta=0.6), dict(eps=1.0, mu=1.0, theta=0.2, L=0.0)])
def test_params_rejected(kw):
    with pytest.raises(ParameterError):
        PlasticParams(**kw)


def test_signed_distance():
    assert signed_distance(0.5, 0.5) == pytest.approx(-0.5)
    assert signed_distance(0.1, 0.7) == pytest.approx(-0.1)
    assert signed_distance(-0.3, 0.5) == pytest.approx(0.3)
    assert signed_distance(-0.3, -0.4) == pytest.approx(0.5)
    assert signed_distance(1.0, 0.5) == pytest.approx(0.0)


# -- step 0 --------------------------------------------------------------------------


@given(thetas, eps_hats, mus, sizes)
def test_trivial_pair_energy(th, eh, mu, L):
    p = PlasticParams.from_eps_hat(eh, mu, th, L)
    e = plastic_energy(step0_trivial(p))
    assert e["total"] == pytest.approx(2 * th**2 * L**3, rel=1e-10)
    assert e["dislocation"] == 0.0 and e["exterior"] == 0.0


def test_trivial_pair_grid_route_exact():
    p = PlasticParams.from_eps_hat(0.1, 0.5, 0.3)
    g = grid_energy(step0_trivial(p), 16)
    assert g["elastic"] == pytest.approx(2 * 0.09, rel=1e-12)
    assert g["dislocation"] == 0.0


def test_uniform_pair_linear_in_mu():
    ratios = [plastic_energy(step0_uniform(PlasticParams.from_eps_hat(1e-2, mu, 0.3)))["total"] / (mu * 0.09)
              for mu in np.geomspace(1e-3, 1.0, 7)]
    assert max(ratios) / min(ratios) == pytest.approx(1.0, abs=1e-12)


def _uniform_exterior_mc(theta: float, n: int, seed: int) -> float:
    # u - u0 = theta x_eta (min(1, dist) - 1), gradient by central differences
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 2.0, size=(n, 3))
    outside = np.any((x < 0) | (x > 1), axis=1)
    x = x[outside]

    def g(y):
        dist = np.sqrt(np.sum(np.maximum(np.maximum(-y, y - 1.0), 0.0) ** 2, axis=-1))
        return theta * (y @ E_ETA) * (np.minimum(1.0, dist) - 1.0)

    h = 1e-6
    grad = np.stack([(g(x + h * e) - g(x - h * e)) / (2 * h) for e in np.eye(3)], axis=1)
    return 27.0 * float(np.sum(grad**2)) / n


def test_uniform_exterior_against_monte_carlo():
    th, mu = 0.3, 0.5
    exact = plastic_energy(step0_uniform(PlasticParams.from_eps_hat(1.0, mu, th)))["exterior"]
    mc = _uniform_exterior_mc(th, 400_000, seed=7)
    assert exact == pytest.approx(mu * mc, rel=0.01)


def test_uniform_pair_beta():
    p = PlasticParams.from_eps_hat(1.0, 0.5, 0.2)
    b = step0_uniform(p).beta(grain_points(50, 1.0, 3))
    assert np.allclose(b, 0.8 * E_XI)


# -- profiles ------------------------------------------------------------------------


def test_laminate_profile_has_zero_truncation():
    v = build_vkm(LAMINATE, PlasticParams.from_eps_hat(1e-5, 1e-3, 0.01))
    assert v.T == 0.0
    assert all(s.kind == CELLS for s in v.field.strips)


@given(st.floats(1e-4, 1e-1), st.floats(0.05, 0.5))
def test_branching_profile_is_linear_right_of_zero(eh, th):
    p = PlasticParams.from_eps_hat(eh, 10.0, th)
    v = build_vkm(BRANCHING, p)
    assert v.T == -(3.0 ** -v.info["I"])
    t = np.array([0.0, 0.1, 0.5, 2.0])
    for y in (0.0, 0.3, 0.77, 1.0):
        assert np.all(v.field.evaluate(t, np.full_like(t, y)) == 0.0)


def test_two_scale_profile_clamps_h():
    v = build_vkm(TWO_SCALE, PlasticParams.from_eps_hat(1e-3, 1e-2, 0.25))
    assert v.info["h_raw"] == pytest.approx(v.info["N"] * 1e-2)
    assert v.info["h"] == 0.25 and v.T == 0.0
    v = build_vkm(TWO_SCALE, PlasticParams.from_eps_hat(1e-3, 5e-2, 0.1))
    assert 0.1 < v.info["h"] == v.info["h_raw"] < 1.0
    assert v.T == -(3.0 ** -v.info["I"])


def test_unknown_regime():
    with pytest.raises(ParameterError):
        build_vkm("Constant", PlasticParams(1.0, 1.0, 0.2))


# -- lift ----------------------------------------------------------------------------


@pytest.mark.parametrize("regime", PLASTIC_REGIMES)
@given(th=thetas, eh=st.floats(1e-3, 10.0), mu=mus, L=sizes)
def test_beta_admissible(regime, th, eh, mu, L):
    p = PlasticParams.from_eps_hat(eh, mu, th, L)
    b = state_for(regime, p).beta(grain_points(400, L, 11))
    assert np.all(b[:, 2] == 0.0)
    b_xi, b_eta = b @ E_XI, b @ E_ETA
    assert np.all(np.abs(b_xi * b_eta) <= 1e-15)
    assert np.all(b_xi >= -1e-15) and np.all(b_eta >= -1e-15)
    if regime != UNIFORM:
        dist = np.minimum(np.linalg.norm(b - E_XI, axis=1), np.linalg.norm(b - E_ETA, axis=1))
        assert np.all(dist <= 1e-15)


@pytest.mark.parametrize("regime", LIFTS)
def test_beta_follows_profile_slope(regime):
    p = PlasticParams.from_eps_hat(1.0, 0.5, 0.25)
    s = lifted(regime, p)
    x = grain_points(2000, 1.0, 5)
    d = signed_distance(x[:, 0], x[:, 2])
    _, bit = s.vkm.field._evaluate(d, x[:, 1])
    b = s.beta(x)
    core = d <= s.T
    assert np.allclose(b[core & (bit == 1)], E_ETA, atol=1e-15)
    assert np.allclose(b[core & (bit != 1)], E_XI, atol=1e-15)
    assert np.allclose(b[~core], E_XI, atol=1e-15)
    assert np.any(core & (bit == 1))


@pytest.mark.parametrize("regime", LIFTS)
@given(th=thetas, eh=st.floats(1e-3, 10.0), L=sizes)
def test_u_matches_far_field_off_the_slab(regime, th, eh, L):
    p = PlasticParams.from_eps_hat(eh, 0.5, th, L)
    s = lifted(regime, p)
    rng = np.random.default_rng(1)
    x = rng.uniform(-0.5 * L, 1.5 * L, size=(300, 3))
    for x2 in (0.0, L):
        x[:, 1] = x2
        assert np.allclose(s.u(x), p.u0(x), atol=1e-12 * L)
    x[:, 1] = rng.choice([-0.5, 1.5], size=300) * L
    assert np.allclose(s.u(x), p.u0(x), rtol=1e-14, atol=1e-14 * L)


def test_lift_rejections():
    p = PlasticParams.from_eps_hat(1.0, 0.5, 0.25)
    v = build_vkm(BRANCHING, p)
    for T in (0.1, -0.6):
        with pytest.raises(ParameterError, match="T must"):
            lift_km_to_3d(v, T, p)
    with pytest.raises(ParameterError, match="two-slope"):
        lift_km_to_3d(v, 0.0, p)
    with pytest.raises(ParameterError, match="resolution"):
        lift_km_to_3d(v, v.T, p, n=8)
    with pytest.raises(ParameterError, match="theta"):
        lift_km_to_3d(v, v.T, PlasticParams.from_eps_hat(1.0, 0.5, 0.3))
    with pytest.raises(ParameterError, match="violates"):
        lift_km_to_3d(VKMProfile("lift", build_uniform(0.25, 1.0), 0.0, {}), 0.0, p)


def test_state_serialization():
    s = lifted(BRANCHING, PlasticParams.from_eps_hat(1e-3, 10.0, 0.25))
    d = s.as_dict()
    assert d["T"] == s.T and d["n"] == 32
    assert d["vkm"]["regime"] == BRANCHING and d["vkm"]["kind"] == "lift"


# -- energies ------------------------------------------------------------------------


@pytest.mark.parametrize("regime", PLASTIC_REGIMES)
@given(th=thetas, eh=eps_hats, mu=mus)
def test_terms_nonnegative(regime, th, eh, mu):
    e = plastic_energy(state_for(regime, PlasticParams.from_eps_hat(eh, mu, th)))
    assert all(v >= 0.0 and math.isfinite(v) for v in e.terms.values())
    assert e["total"] == pytest.approx(e["elastic"] + e["dislocation"] + e["exterior"], rel=1e-12)


@pytest.mark.parametrize("regime", PLASTIC_REGIMES)
@given(th=thetas, eh=eps_hats, mu=mus, L=sizes)
def test_energy_scales_with_grain_volume(regime, th, eh, mu, L):
    e1 = plastic_energy(state_for(regime, PlasticParams.from_eps_hat(eh, mu, th)))
    eL = plastic_energy(state_for(regime, PlasticParams.from_eps_hat(eh, mu, th, L)))
    assert eL["total"] / L**3 == pytest.approx(e1["total"], rel=1e-9)


@pytest.mark.parametrize("regime", LIFTS)
def test_grid_route_rescaling(regime):
    g = [grid_energy(lifted(regime, PlasticParams.from_eps_hat(1.0, 0.5, 0.25, L)), 32) for L in (1.0, 3.0)]
    for k in ("elastic", "dislocation"):
        assert g[1][k] / 27.0 == pytest.approx(g[0][k], rel=0.01)


def test_laminate_grid_route_matches():
    s = lifted(LAMINATE, PlasticParams.from_eps_hat(0.3, 0.5, 0.25))
    e = plastic_energy(s)
    g32, g64 = grid_energy(s, 32), grid_energy(s, 64)
    assert g64["elastic"] == pytest.approx(0.0, abs=1e-20)
    assert e["elastic"] == 0.0
    assert abs(g64["dislocation"] / g32["dislocation"] - 1) < 0.05
    assert g64["dislocation"] == pytest.approx(e["dislocation"], rel=0.05)


@pytest.mark.parametrize("regime", (BRANCHING, TWO_SCALE))
def test_branched_grid_route_converges(regime):
    s = lifted(regime, PlasticParams.from_eps_hat(1.0, 0.5, 0.25))
    e = plastic_energy(s)
    gaps = [abs(grid_energy(s, n)["dislocation"] - e["dislocation"]) for n in (32, 64, 128)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.1 * e["dislocation"]
    assert grid_energy(s, 128)["elastic"] == pytest.approx(e["elastic"], rel=0.15)


def test_interpolation_slab_bound():
    th = 0.25
    ratios = []
    for eh in np.geomspace(1e-4, 1e-2, 9):
        e = plastic_energy(lifted(BRANCHING, PlasticParams.from_eps_hat(eh, 10.0, th)))
        ratios.append(e["elastic_slab"] / (th**2 * eh ** (2 / 3)))
    assert 0 < min(ratios) and max(ratios) < 0.25


def test_grid_resolution_rejected():
    with pytest.raises(ParameterError):
        grid_energy(step0_trivial(PlasticParams(1.0, 1.0, 0.2)), 8)
