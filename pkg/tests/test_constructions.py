from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from microbranch.cells import evaluate_cell
from microbranch.constructions import (CELLS, SLAB, TAIL, branch_cell, branch_cell_connected,
                                       build_single_laminate, build_tsb, build_uniform,
                                       half_period_projections, trace_at_interface)
from microbranch.energy import martensite_elastic, surface_energy, total_energy_km, vertical_variation
from microbranch.params import NEUMANN, PERIODIC, ConstructionParams, ModelParams, ParameterError


def tsb(N, h, ell, th, L=1.0, bc=NEUMANN, I=None):
    cp = ConstructionParams(N=N, h=h, ell=ell, theta=th, L=L, bc=bc, truncation_level=I)
    return build_tsb(cp, ModelParams(eps=1.0, mu=1.0, L=L, theta=th, bc=bc))


@st.composite
def branch_args(draw):
    th = draw(st.floats(0.01, 0.5))
    h = draw(st.floats(0.05, 2.0))
    eta = draw(st.floats(th * h, h))
    ell = draw(st.floats(0.05, 2.0))
    return h, eta, ell, th


FIELDS = {
    "uniform": lambda: build_uniform(0.2, 1.5),
    "laminate": lambda: build_single_laminate(0.2, 1.5),
    "tsb_neumann": lambda: tsb(1, 0.6, 0.5, 0.2, L=1.5),
    "tsb_periodic": lambda: tsb(3, 0.5, 1.0, 0.2, bc=PERIODIC),
    "tsb_shallow_periodic": lambda: tsb(1, 0.5, 0.4, 0.2, bc=PERIODIC),
    "tsb_truncated": lambda: tsb(2, 0.6, 1.0, 0.25, I=5),
    "classical_laminate": lambda: tsb(4, 0.25, 1.0, 0.25, bc=PERIODIC),
}


# -- uniform and single laminate ----------------------------------------------------------


def test_uniform_field():
    f = build_uniform(0.3, 2.0)
    assert f.evaluate(-1.0, 0.5) == pytest.approx(0.15, rel=1e-15)
    assert f.interface_count() == 0
    tr = trace_at_interface(f)
    assert tr.breakpoints.tolist() == [0.0, 1.0] and tr.values.tolist() == [0.0, 0.3]


def test_single_laminate_field():
    th, L = 0.2, 1.7
    f = build_single_laminate(th, L)
    assert f.evaluate(-L, th) == pytest.approx((th - 1) * th, rel=1e-14)
    assert surface_energy(f, 1.0) == pytest.approx(L, rel=1e-15)
    assert f.interface_count() == 1
    y = np.linspace(0, 1, 7)
    assert np.all(f.evaluate(np.full_like(y, 1.0), y) == 0.0)
    assert np.all(f.evaluate(np.full_like(y, 3.0), y) == 0.0)
    tr = trace_at_interface(f)
    assert np.allclose(tr(y), np.where(y <= th, (th - 1) * y, th * (y - 1)), atol=1e-15)
    assert f.is_periodic()


# -- branch cells -------------------------------------------------------------------------


@given(branch_args())
def test_branch_cell_boundary_values(args):
    h, eta, ell, th = args
    f = branch_cell(h, eta, ell, th)
    x = np.linspace(-ell, 0, 9)[:-1]
    assert np.allclose(f.evaluate(x, 0.0 * x), 0.0, atol=1e-14)
    assert np.allclose(f.evaluate(x, np.full_like(x, h)), h * th - eta, atol=1e-12 * max(1, h))


@given(branch_args())
def test_branch_cell_self_similarity(args):
    h, eta, ell, th = args
    f = branch_cell(h, eta, ell, th)
    y = np.linspace(0, h / 2, 33)
    edge = np.full_like(y, -1e-15 * ell)  # x1 = 0 itself belongs to the austenite
    assert np.allclose(f.evaluate(edge, y), 0.5 * f.evaluate(np.full_like(y, -ell), 2 * y),
                       atol=1e-12 * max(1, h))


@given(branch_args())
def test_branch_cell_slope_two_valued(args):
    h, eta, ell, th = args
    f = branch_cell(h, eta, ell, th)
    rng = np.random.default_rng(0)
    x = rng.uniform(-ell, 0, 400)
    y = rng.uniform(0, h, 400)
    bits = f.slope_bit(x, y)
    assert set(np.unique(bits)) <= {0, 1}
    d = 1e-9 * h
    slope = (f.evaluate(x, y + d) - f.evaluate(x, y - d)) / (2 * d)
    near = np.isclose(slope, th, atol=1e-4) | np.isclose(slope, th - 1, atol=1e-4)
    assert near.mean() >= 0.99


@given(branch_args())
def test_branch_cell_tv_bounds(args):
    h, eta, ell, th = args
    horiz, vert = half_period_projections(branch_cell(h, eta, ell, th))
    assert horiz <= 4 * ell * (1 + 1e-12)
    assert vert <= 4 * eta * (1 + 1e-12)
    c_horiz, _ = half_period_projections(branch_cell_connected(h, eta, ell, th))
    assert c_horiz <= 4 * ell * (1 + 1e-12)


@given(branch_args())
def test_connected_variant_shares_boundary_data(args):
    h, eta, ell, th = args
    a, b = branch_cell(h, eta, ell, th), branch_cell_connected(h, eta, ell, th)
    x = np.linspace(-ell, 0, 5)[:-1]
    for y in (0.0, h):
        assert np.allclose(a.evaluate(x, np.full_like(x, y)), b.evaluate(x, np.full_like(x, y)), atol=1e-12)
    _, vert = half_period_projections(b)
    assert vert == pytest.approx((h - eta) / 2, rel=1e-12, abs=1e-15)


def test_connected_projection_example():
    _, v = half_period_projections(branch_cell(1.0, 0.01, 1.0, 0.01))
    _, vc = half_period_projections(branch_cell_connected(1.0, 0.01, 1.0, 0.01))
    assert v <= 0.04
    assert vc == pytest.approx(0.495, rel=1e-12)


@given(st.floats(0.1, 2.0), st.floats(0.1, 2.0), st.floats(9.01, 99.0), st.floats(0.01, 1.0))
def test_connected_violates_vertical_bound(h, ell, ratio, frac):
    eta = h / ratio
    th = frac * eta / h  # keeps theta * h <= eta
    _, vc = half_period_projections(branch_cell_connected(h, eta, ell, th))
    assert vc > 4 * eta


@given(branch_args(), st.floats(0.1, 10.0))
def test_branch_cell_scaling_covariance(args, s):
    h, eta, ell, th = args
    a = branch_cell(h, eta, ell, th)
    b = branch_cell(s * h, s * eta, s * ell, th)
    rng = np.random.default_rng(1)
    x = rng.uniform(-ell, 0, 50)
    y = rng.uniform(0, h, 50)
    assert np.allclose(b.evaluate(s * x, s * y), s * a.evaluate(x, y), atol=1e-11 * s * max(1, h))


@given(branch_args())
def test_branch_cell_elastic_bound(args):
    h, eta, ell, th = args
    assume(h - eta > 1e-6 * h)
    ratio = martensite_elastic(branch_cell(h, eta, ell, th)) / (eta**2 * (h - eta) / ell)
    # the leaf's elastic energy is (eta/(2 ell))^2 * (h - eta)/2 * ell ... in closed form
    assert 0 < ratio <= 0.5


def test_branch_cell_elastic_vanishes_for_eta_equal_h():
    assert martensite_elastic(branch_cell(0.4, 0.4, 1.0, 0.3)) == 0.0


def test_branch_cell_rejects_eta():
    with pytest.raises(ParameterError):
        branch_cell(1.0, 0.05, 1.0, 0.1)
    with pytest.raises(ParameterError):
        branch_cell_connected(1.0, 1.5, 1.0, 0.1)


# -- two-scale branching ------------------------------------------------------------------


def test_tsb_laminate_case_matches_single_laminate_interior():
    # one flat minority stripe per period, centred in the band, so two interfaces each
    for N in (1, 5):
        f = tsb(N, 0.25, 1.0, 0.25, bc=PERIODIC)
        assert martensite_elastic(f) == 0.0
        assert f.interface_count() == 2 * N
        assert surface_energy(f, 1.0) == pytest.approx(2 * N * 1.0, rel=1e-14)
        horiz, vert = f.projections()
        assert vert == 0.0


def test_tsb_full_height_has_zero_austenite():
    f = tsb(3, 1.0, 1.0, 0.2, bc=PERIODIC)
    y = np.linspace(0, 1, 101)
    for x in (0.0, 0.01, 0.5):
        assert np.all(f.evaluate(np.full_like(y, x), y) == 0.0)
    assert np.all(trace_at_interface(f).values == 0.0)


def _strip_values(f, strip, s, y):
    if strip.kind == CELLS:
        return evaluate_cell(strip.cell, f.theta, np.full_like(y, s), y)[0]
    if strip.kind == TAIL:
        return evaluate_cell(strip.cell, f.theta, np.zeros_like(y), y)[0]
    t = s / (strip.x_lo - strip.x_hi)
    return t * evaluate_cell(strip.cell, f.theta, np.zeros_like(y), y)[0] + (1 - t) * strip.right(y)


@pytest.mark.parametrize("name", sorted(FIELDS))
def test_field_two_slope_and_lipschitz(name):
    f = FIELDS[name]()
    rng = np.random.default_rng(7)
    x = rng.uniform(-f.L, 0, 3000)
    y = rng.uniform(0, 1, 3000)
    bits = f.slope_bit(x, y)
    slab = np.zeros_like(x, dtype=bool)
    for s in f.strips:
        if s.kind == SLAB:
            slab |= (x >= s.x_lo) & (x < s.x_hi)
    assert set(np.unique(bits[~slab])) <= {0, 1}
    lip = max(f.theta, 1 - f.theta) * math.sqrt(2)
    d = 1e-4
    # vertical steps everywhere
    ya = np.clip(y + d, 0, 1)
    ok = ya > y
    jump = np.abs(f.evaluate(x, ya) - f.evaluate(x, y))[ok] / (ya - y)[ok]
    assert np.all(jump <= lip * (1 + 1e-9))
    # horizontal steps in the coarsest strip; finer levels have steeper interfaces
    first = f.strips[0]
    xs = rng.uniform(first.x_lo, first.x_hi - d, 500)
    ys = rng.uniform(0, 1, 500)
    jump = np.abs(f.evaluate(xs + d, ys) - f.evaluate(xs, ys)) / d
    assert np.all(jump <= lip * (1 + 1e-9))


@pytest.mark.parametrize("name", sorted(FIELDS))
def test_field_continuous_across_strips(name):
    f = FIELDS[name]()
    y = np.linspace(0, 1, 257)
    for a, b in zip(f.strips, f.strips[1:]):
        left = _strip_values(f, a, 0.0, y)
        right = _strip_values(f, b, -b.length, y)
        assert np.max(np.abs(left - right)) < 1e-12


@pytest.mark.parametrize("name", sorted(FIELDS))
def test_austenite_attaches_continuously(name):
    f = FIELDS[name]()
    y = np.linspace(0, 1, 257)
    a = f.evaluate(np.full_like(y, -1e-13), y)
    b = f.evaluate(np.zeros_like(y), y)
    assert np.max(np.abs(a - b)) < 1e-9


@pytest.mark.parametrize("name", ["tsb_periodic", "tsb_shallow_periodic", "classical_laminate", "laminate"])
def test_periodic_column_mass(name):
    f = FIELDS[name]()
    assert f.is_periodic(tol=1e-12)
    x = np.linspace(-f.L, -1e-9, 17)
    assert np.allclose(f.evaluate(x, np.ones_like(x)), f.evaluate(x, np.zeros_like(x)), atol=1e-12)


def test_tsb_structure_kinds():
    assert any(s.kind == TAIL for s in tsb(1, 1.0, 1.0, 0.2).strips)
    trunc = FIELDS["tsb_truncated"]()
    assert trunc.strips[-1].kind == SLAB
    assert trunc.strips[-1].x_lo == pytest.approx(-(3.0**-5))
    assert all(s.kind == CELLS for s in FIELDS["classical_laminate"]().strips)


def test_tsb_rejections():
    with pytest.raises(ParameterError):
        ConstructionParams(N=2, h=0.5, ell=0.5, theta=0.2, L=1.0)
    with pytest.raises(ParameterError):
        ConstructionParams(N=2, h=0.5, ell=1.0, theta=0.2, L=1.0, truncation_level=1)
    cp = ConstructionParams(N=1, h=0.5, ell=1.0, theta=0.2, L=1.0)
    with pytest.raises(ParameterError):
        build_tsb(cp, ModelParams(eps=1.0, mu=1.0, L=1.0, theta=0.25))


@pytest.mark.parametrize("bc", [NEUMANN, PERIODIC])
def test_tsb_energy_bound_constant_stable(bc):
    th, L, mu, eh = 0.1, 1.0, 0.05, 1e-5
    ratios = []
    for N in (2, 4, 8, 16):
        for h in (0.2, 0.5, 1.0):
            p = ModelParams.from_eps_hat(eh, mu, L, th, bc=bc)
            e = total_energy_km(tsb(N, h, L, th, L=L, bc=bc), p).total_optimal
            bound = th**2 * ((h - th) / (L * N**2) + eh * L * N + mu / N * math.log(1 / h))
            ratios.append(e / bound)
    assert max(ratios) < 10.0
    assert max(ratios) / min(ratios) < 10.0


def test_vertical_variation_finite_only_when_truncated():
    assert math.isinf(vertical_variation(tsb(1, 1.0, 1.0, 0.2)))
    assert math.isfinite(vertical_variation(tsb(4, 0.25, 1.0, 0.25, bc=PERIODIC)))
