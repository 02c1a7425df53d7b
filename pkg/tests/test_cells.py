from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from microbranch.austenite import RAMP, SINGLE_LAMINATE, TSB, ZERO, Austenite, tsb_limit_trace
from microbranch.cells import (Leaf, Stack, StripIntegrator, check_cell, evaluate_cell,
                               expand_breakpoints, l2_distance_to_trace, net_coefficients,
                               roll_cell, split_cell)
from microbranch.trace import NonPeriodicTrace, TraceProfile

TH = 0.3


def sample_leaf():
    # two slanted interfaces, ordered on [-1, 0]
    return Leaf(1.0, 0, (0.4, 0.7), (0.1, -0.05))


def sample_stack():
    a = Leaf(0.25, 1, (0.1,), (0.02,))
    b = Leaf(0.5, 0, (0.2, 0.35), (0.0, 0.05))
    return Stack(((a, 3), (b, 2), (Stack(((a, 2),)), 1)))


def dense_du1_squared(cell, theta, length, ny=4001, ns=401, weight=None):
    """Midpoint oracle for the strip integral of (d u / d x1)^2."""
    s = np.linspace(-length, 0.0, ns)
    y = np.linspace(0.0, cell.height, ny)
    S, Y = np.meshgrid(s, y, indexing="ij")
    U, _ = evaluate_cell(cell, theta, S, Y)
    du = np.gradient(U, s, axis=0)
    w = np.ones_like(s) if weight is None else weight(s)
    return integrate.trapezoid(integrate.trapezoid(du**2, y, axis=1) * w, s)


# -- trace ------------------------------------------------------------------------------


@pytest.mark.parametrize("x,v", [([0, 1, 0.5], [0, 1, 2]), ([0.1, 1], [0, 0]), ([0, 0.5, 1], [0, np.nan, 1]),
                                 ([0, 0.5, 0.5, 1], [0, 0, 0, 0])])
def test_trace_rejects_bad_input(x, v):
    with pytest.raises(ValueError):
        TraceProfile(np.array(x, float), np.array(v, float))


def test_trace_roll_and_simplify():
    t = TraceProfile(np.array([0, 0.25, 0.5, 1.0]), np.array([0.0, 0.5, 0.75, 0.0]))
    r = t.rolled(0.25)
    y = np.linspace(0, 1, 97)
    assert np.allclose(r(y), t(np.mod(y + 0.25, 1.0)) - t(0.25), atol=1e-14)
    lin = TraceProfile(np.linspace(0, 1, 11), np.linspace(0, 2, 11)).simplified()
    assert lin.breakpoints.tolist() == [0.0, 1.0]
    with pytest.raises(NonPeriodicTrace):
        lin.rolled(0.3)


# -- cells ------------------------------------------------------------------------------


def test_leaf_validation():
    with pytest.raises(ValueError):
        Leaf(1.0, 2)
    with pytest.raises(ValueError):
        Leaf(0.0, 0)
    with pytest.raises(ValueError):
        Leaf(1.0, 0, (0.5,), ())
    with pytest.raises(ValueError):
        Stack(((Leaf(1.0, 0), 0),))
    with pytest.raises(ValueError):
        check_cell(Leaf(1.0, 0, (0.4, 0.5), (-0.3, 0.0)), 1.0)  # crosses at s = -1


@pytest.mark.parametrize("cell", [sample_leaf(), sample_stack()])
def test_vertical_slope_two_valued(cell):
    rng = np.random.default_rng(3)
    s = rng.uniform(-1, 0, 500)
    y = rng.uniform(0, cell.height, 500)
    dy = 1e-7
    v0, bit = evaluate_cell(cell, TH, s, y)
    v1, _ = evaluate_cell(cell, TH, s, y + dy)
    slope = (v1 - v0) / dy
    ok = np.isclose(slope, TH, atol=1e-5) | np.isclose(slope, TH - 1, atol=1e-5)
    assert ok.mean() > 0.99  # samples straddling an interface are the exception
    assert set(np.unique(bit)) <= {0, 1}


@pytest.mark.parametrize("cell", [sample_leaf(), sample_stack()])
def test_net_coefficients_match_evaluation(cell):
    n0, n1 = net_coefficients(cell, TH)
    for s in (-1.0, -0.4, 0.0):
        v, _ = evaluate_cell(cell, TH, np.array([s]), np.array([cell.height]))
        assert v[0] == pytest.approx(n0 + n1 * s, abs=1e-13)


@pytest.mark.parametrize("cell", [sample_leaf(), sample_stack()])
def test_strip_elastic_matches_dense_quadrature(cell):
    summ = StripIntegrator(TH, 1.0).summary(cell)
    exact = summ.gamma  # bottom value of d u / d x1 is 0 with u(s, 0) = 0
    assert exact == pytest.approx(dense_du1_squared(cell, TH, 1.0), rel=2e-3)


def test_strip_weighted_integral():
    cell = sample_stack()
    w = lambda s: 1.0 + 2.0 * (s + 1.0)  # noqa: E731
    summ = StripIntegrator(TH, 1.0, weight=w).summary(cell)
    assert summ.gamma == pytest.approx(dense_du1_squared(cell, TH, 1.0, weight=w), rel=2e-3)


def test_stack_of_many_copies_is_exact():
    leaf = Leaf(1.0, 0, (0.5,), (0.2,))
    R = 2**40
    small = Leaf(1.0 / R, 0, (0.5 / R,), (0.2 / R,))
    big = Stack(((small, R),))
    one = StripIntegrator(TH, 1.0).summary(leaf)
    many = StripIntegrator(TH, 1.0).summary(big)
    assert one.minority_area == pytest.approx(0.6, rel=1e-14)
    assert many.minority_area == pytest.approx(0.6, rel=1e-12)
    # R slanted interfaces plus R - 1 flat ones where consecutive copies meet
    assert sum(many.interfaces.values()) == 2 * R - 1
    n0, _ = net_coefficients(big, TH)
    assert n0 == pytest.approx(TH - 0.5, rel=1e-12)


@pytest.mark.parametrize("cell", [sample_leaf(), sample_stack()])
def test_expand_breakpoints_matches_evaluation(cell):
    y, v = expand_breakpoints(cell, TH, -0.3)
    assert y[0] == 0 and y[-1] == pytest.approx(cell.height)
    ys = np.linspace(0, cell.height, 301)
    ref, _ = evaluate_cell(cell, TH, np.full_like(ys, -0.3), ys)
    assert np.allclose(np.interp(ys, y, v), ref, atol=1e-13)


@given(st.floats(-1.0, 0.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_l2_distance_matches_dense(s, a, b):
    cell = sample_stack()
    H = cell.height
    trace = TraceProfile(np.array([0.0, 0.37, 1.0]) * 1.0, np.array([0.0, a, b]))
    # the trace lives on [0, 1]; rescale to the cell height
    tr = TraceProfile(trace.breakpoints, trace.values)
    exact = l2_distance_to_trace(cell, TH, s, _Scaled(tr, H))
    ys = np.linspace(0, H, 20001)
    u, _ = evaluate_cell(cell, TH, np.full_like(ys, s), ys)
    ref = integrate.trapezoid((u - tr(ys / H)) ** 2, ys)
    assert exact == pytest.approx(ref, rel=1e-5, abs=1e-10)


class _Scaled:
    """Trace stretched from [0, 1] to [0, H]."""

    def __init__(self, tr, H):
        self.breakpoints = tr.breakpoints * H
        self.values = tr.values
        self.slopes = tr.slopes / H
        self._tr, self._H = tr, H

    def __call__(self, y):
        return self._tr(np.asarray(y) / self._H)


def test_split_and_roll_preserve_pattern():
    cell = sample_stack().frozen_at(0.0)
    H = cell.height
    lo, up = split_cell(cell, 0.75)
    assert lo.height + up.height == pytest.approx(H)
    rolled = roll_cell(cell, 0.75)
    ys = np.linspace(0.01, H - 0.01, 200)
    _, b_new = evaluate_cell(rolled, TH, np.zeros_like(ys), ys)
    _, b_old = evaluate_cell(cell, TH, np.zeros_like(ys), np.mod(ys + 0.75, H))
    assert np.mean(b_new == b_old) > 0.98
    with pytest.raises(ValueError):
        split_cell(Leaf(1.0, 0, (0.5,), (0.3,)), 0.45, s_values=(-1.0, 0.0))


# -- austenite --------------------------------------------------------------------------


def numeric_dirichlet(aus: Austenite, x_max: float) -> float:
    """Independent route: finite-difference gradient of ``value`` on a fine grid."""
    x = np.linspace(0.0, x_max, 1601)
    y = np.linspace(0.0, 1.0, 1601)
    X, Y = np.meshgrid(x, y, indexing="ij")
    V = aus.value(X, Y)
    g1, g2 = np.gradient(V, x, y)
    return integrate.trapezoid(integrate.trapezoid(g1**2 + g2**2, y, axis=1), x)


@pytest.mark.parametrize("aus", [Austenite(RAMP, 0.2), Austenite(SINGLE_LAMINATE, 0.25),
                                 Austenite(TSB, 0.2, 2, 0.4), Austenite(TSB, 0.2, 1, 0.5, 0.5)])
def test_austenite_closed_form_energy(aus):
    ref = numeric_dirichlet(aus, max(aus.support, 1e-3) * 1.05)
    assert aus.closed_form_energy() == pytest.approx(ref, rel=2e-2)
    x = np.linspace(0, aus.support, 2001)
    slices = integrate.trapezoid([aus.slice_energy(v) for v in x], x)
    assert aus.closed_form_energy() == pytest.approx(slices, rel=1e-4)


def test_ramp_energy_is_two_thirds():
    for th in (0.01, 0.3, 0.5):
        assert Austenite(RAMP, th).closed_form_energy() == pytest.approx(2 * th**2 / 3, rel=1e-15)


@pytest.mark.parametrize("aus", [Austenite(RAMP, 0.2), Austenite(SINGLE_LAMINATE, 0.25),
                                 Austenite(TSB, 0.2, 3, 0.4), Austenite(TSB, 0.1, 2, 0.3, 0.5)])
def test_austenite_trace_and_support(aus):
    y = np.linspace(0, 1, 513)
    assert np.allclose(aus.value(0.0, y), aus.trace()(y), atol=1e-14)
    assert np.all(aus.value(aus.support + 1e-9, y) == 0.0)


def test_tsb_h_one_vanishes_and_zero_kind():
    aus = Austenite(TSB, 0.2, 4, 1.0)
    assert aus.support == 0.0
    assert np.all(aus.trace().values == 0.0)
    assert Austenite(ZERO).closed_form_energy() == 0.0
    with pytest.raises(ValueError):
        Austenite("other")
    with pytest.raises(ValueError):
        Austenite(TSB, 0.2, 1, 0.5, 0.25)


def test_tsb_limit_trace_is_periodic_and_repeats():
    t1 = tsb_limit_trace(1, 0.4, 0.2)
    t3 = tsb_limit_trace(3, 0.4, 0.2)
    y = np.linspace(0, 1, 301)
    assert t3.is_periodic
    assert np.allclose(t3(y), t1(np.mod(3 * y, 1.0)) / 3, atol=1e-15)
