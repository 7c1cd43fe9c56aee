import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from hagerlab.errors import DegenerateSymbol, MultipleCritical, OutOfStrip
from hagerlab.symbol import (
    FourierSymbol,
    action,
    boundary_distance,
    bracket_factor,
    branch_integrals,
    critical_points,
    evaluate,
    turning_points,
)

TWO_PI = 2 * math.pi


def test_eval_examples(g):
    assert evaluate(g, 0.0) == 1
    assert abs(evaluate(g, math.pi / 2) - (-1j)) < 1e-15
    cos = FourierSymbol.__new__(FourierSymbol)  # cos x has no strip; evaluate the series directly
    cos._m, cos._c = np.array([1.0, -1.0]), np.array([0.5, 0.5], dtype=complex)
    assert abs(FourierSymbol.eval(cos, 0.0, order=2) - (-1)) < 1e-15


def test_eval_rejects_order(g):
    with pytest.raises(ValueError):
        evaluate(g, 0.0, order=3)


def test_eval_derivatives_match_finite_differences(skewed):
    x, step = 0.7, 1e-6
    fd1 = (skewed.eval(x + step) - skewed.eval(x - step)) / (2 * step)
    fd2 = (skewed.eval(x + step, 1) - skewed.eval(x - step, 1)) / (2 * step)
    assert abs(fd1 - skewed.eval(x, 1)) < 1e-8
    assert abs(fd2 - skewed.eval(x, 2)) < 1e-8


def test_antiderivative_matches_quadrature(skewed):
    a, b = -0.4, 2.3
    re = quad(lambda x: skewed.eval(x).real, a, b, epsabs=1e-14)[0]
    im = quad(lambda x: skewed.eval(x).imag, a, b, epsabs=1e-14)[0]
    got = skewed.antiderivative(b) - skewed.antiderivative(a)
    assert abs(got - complex(re, im)) < 1e-12


def test_mean_is_zeroth_coefficient(skewed):
    xs = TWO_PI * np.arange(64) / 64
    assert abs(np.mean(skewed.eval(xs)) - skewed.mean) < 1e-14


def test_critical_points_exp_minus_ix(g):
    a, b = critical_points(g)
    assert abs(a - math.pi / 2) < 1e-12
    assert abs(b - 3 * math.pi / 2) < 1e-12
    assert abs(g.eval(a, 1).imag) <= 1e-12 and abs(g.eval(b, 1).imag) <= 1e-12


def test_critical_points_exp_ix():
    a, b = critical_points(FourierSymbol({1: 1.0}))
    assert abs(a - 3 * math.pi / 2) < 1e-12
    assert abs(b % TWO_PI - math.pi / 2) < 1e-12


def test_constant_imaginary_part_is_rejected():
    with pytest.raises(DegenerateSymbol):
        FourierSymbol({1: 0.5, -1: 0.5})


def test_more_than_two_critical_points_rejected():
    # Im g = -sin x + 0.3 cos 2x has four critical points
    with pytest.raises(MultipleCritical):
        FourierSymbol({-1: 1.0, -2: 0.3j})


def test_strip_bounds(g):
    assert g.im_min == pytest.approx(-1.0, abs=1e-15)
    assert g.im_max == pytest.approx(1.0, abs=1e-15)


def test_turning_points_at_origin(g):
    tp = turning_points(g, 0j)
    assert tp.x_plus == pytest.approx(0.0, abs=1e-12)
    assert tp.x_minus == pytest.approx(math.pi, abs=1e-12)
    assert tp.xi_plus == pytest.approx(-1.0, abs=1e-12)
    assert tp.xi_minus == pytest.approx(1.0, abs=1e-12)


def test_turning_points_outside_strip(g):
    with pytest.raises(OutOfStrip):
        turning_points(g, 1.5j)
    with pytest.raises(OutOfStrip):
        turning_points(g, complex(0.3, g.im_min))


@settings(max_examples=60, deadline=None)
@given(t=st.floats(min_value=-0.999, max_value=0.999), re=st.floats(min_value=-3, max_value=3))
def test_turning_point_invariants(skewed, t, re):
    y = skewed.mean_im + t * 0.5 * (skewed.im_max - skewed.im_min)
    y = min(max(y, skewed.im_min + 1e-6), skewed.im_max - 1e-6)
    tp = turning_points(skewed, complex(re, y))
    assert tp.x_minus - TWO_PI < tp.x_plus < tp.x_minus
    assert abs(skewed.eval(tp.x_plus).imag - y) <= 1e-10
    assert abs(skewed.eval(tp.x_minus).imag - y) <= 1e-10
    assert skewed.eval(tp.x_plus, 1).imag < 0 < skewed.eval(tp.x_minus, 1).imag
    assert tp.xi_plus == pytest.approx(re - skewed.eval(tp.x_plus).real, abs=1e-12)


def test_action_at_line(g):
    s = action(g, 0.0)
    assert abs(s.s - 2.0) <= 1e-12
    assert s.ds == pytest.approx(math.pi, abs=1e-12)
    assert s.d2s == pytest.approx(2.0, abs=1e-12)


def test_action_symmetry(g):
    up, down = action(g, 0.5), action(g, -0.5)
    assert up.s == pytest.approx(down.s, abs=1e-13)
    # closed form: Im(z - g) = y + sin x between x+ = asin(-y) and x- = pi - asin(-y)
    y = -0.5
    a = math.asin(-y)
    ref = y * (math.pi - 2 * a) + 2 * math.cos(a)
    assert down.s == pytest.approx(ref, abs=1e-12)


def _action_oracle(symbol, y):
    tp = turning_points(symbol, complex(0, y))
    end = tp.x_minus if y <= symbol.mean_im else tp.x_minus - TWO_PI
    val = quad(lambda x: y - symbol.eval(x).imag, tp.x_plus, end, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    return abs(val)


@pytest.mark.parametrize("frac", [-0.95, -0.6, -0.2, 0.0, 0.3, 0.7, 0.95])
def test_action_matches_quadrature(skewed, frac):
    y = skewed.mean_im + frac * 0.5 * (skewed.im_max - skewed.im_min)
    assert abs(action(skewed, y).s - _action_oracle(skewed, y)) <= 1e-9


def test_action_derivatives_match_finite_differences(skewed):
    step = 1e-5
    half = 0.5 * (skewed.im_max - skewed.im_min)
    for frac in np.linspace(-0.9, 0.9, 13):
        y = skewed.mean_im + frac * half
        if abs(y - skewed.mean_im) < 1e-3:
            continue
        fd = (action(skewed, y + step).s - action(skewed, y - step).s) / (2 * step)
        assert abs(action(skewed, y).ds - fd) <= 1e-6
        fd2 = (action(skewed, y + step).ds - action(skewed, y - step).ds) / (2 * step)
        assert abs(action(skewed, y).d2s - fd2) <= 1e-5


def test_branches_agree_on_the_line(skewed):
    one, two = branch_integrals(skewed, skewed.mean_im)
    assert one == pytest.approx(two, abs=1e-12)
    below = action(skewed, skewed.mean_im - 1e-9).s
    above = action(skewed, skewed.mean_im + 1e-9).s
    assert abs(below - above) < 1e-7


def test_action_monotone_and_nonnegative(skewed):
    ys = np.linspace(skewed.im_min + 1e-6, skewed.im_max - 1e-6, 200)
    s = np.array([action(skewed, y).s for y in ys])
    assert np.all(s >= 0)
    below = ys < skewed.mean_im
    assert np.all(np.diff(s[below]) > 0)
    assert np.all(np.diff(s[~below]) < 0)
    assert action(skewed, skewed.mean_im).s >= s.max()


def test_action_vanishes_at_edges(g):
    assert action(g, -1 + 1e-8).s < 1e-10
    assert action(g, 1 - 1e-8).s < 1e-10


def test_action_scales_like_distance_to_boundary(g):
    d = np.linspace(0.01, 0.5, 50)
    for sign in (-1, 1):
        ys = sign * (1 - d)
        s_ratio = np.array([action(g, y).s for y in ys]) / d**1.5
        ds_ratio = np.array([abs(action(g, y).ds) for y in ys]) / d**0.5
        for r in (s_ratio, ds_ratio):
            assert 0.1 < r.min() and r.max() < 10


def test_bracket_factor(g):
    assert bracket_factor(g, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert bracket_factor(FourierSymbol({-1: 2.0}), 0.0) == pytest.approx(4.0, abs=1e-12)
    assert bracket_factor(g, 1 - 1e-6) < 1e-2
    assert bracket_factor(g, -1 + 1e-6) < 1e-2
    with pytest.raises(OutOfStrip):
        bracket_factor(g, 1.2)


def test_boundary_distance(g):
    assert boundary_distance(g, 0.3j) == pytest.approx(0.7)
    assert boundary_distance(g, -1j) == pytest.approx(0.0, abs=1e-15)
    assert boundary_distance(g, 2j) == pytest.approx(-1.0)


def test_config_triples_round_trip(skewed):
    again = FourierSymbol.from_triples(skewed.to_triples())
    assert again == skewed and hash(again) == hash(skewed)
