import math
import time

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plyse.capacity import (
    DegenerateCubicError,
    cubic_coefficients,
    cubic_roots_trig,
    e_max_u,
    h_bar_poly,
    h_of_omega,
    omega_threshold,
    q_max_bound,
    real_cubic_roots,
)


def test_e_max_u_hand_arithmetic(params):
    assert e_max_u(params) == pytest.approx(0.1 + 0.1 + 0.64, rel=1e-12)
    p = params.replace(r_max=1.0, p_max=1e-300)
    assert e_max_u(p) == pytest.approx(1e-8 + 0.64, rel=1e-9)
    p2 = params.replace(T=2.0)
    assert e_max_u(p2) - 0.1 == pytest.approx(2 * (e_max_u(params) - 0.1))


def test_q_max(params):
    assert q_max_bound(params) == 2.57e9
    assert q_max_bound(params.replace(V=1e-9)) == pytest.approx(params.r_max)


def test_general_solver_constructed_roots():
    # (x-1)(x-2)(x-3)
    assert real_cubic_roots(1, -6, 11, -6) == pytest.approx([1, 2, 3], abs=1e-9)
    # one real root: (x-2)(x^2+1)
    assert real_cubic_roots(1, -2, 1, -2) == pytest.approx([2.0], abs=1e-12)
    # p > 0 branch: x^3 + x + 2 has the single root -1
    assert real_cubic_roots(1, 0, 1, 2) == pytest.approx([-1.0], abs=1e-12)
    # p == 0: x^3 - 8
    assert real_cubic_roots(1, 0, 0, -8) == pytest.approx([2.0], abs=1e-12)


def test_squared_form_constructed_roots():
    # A1^2 x^3 + 2 A1 A2 x^2 + A2^2 x + A3 with A1=1, A2=-3, A3=-2 is x^3-6x^2+9x-2
    # = (x-2)(x^2-4x+1), roots 2 - sqrt3, 2, 2 + sqrt3
    r = cubic_roots_trig(1.0, -3.0, -2.0)
    assert r == pytest.approx([2 - math.sqrt(3), 2.0, 2 + math.sqrt(3)], abs=1e-9)


def test_squared_form_cannot_hold_roots_123():
    # this coefficient shape forces (sum of roots)^2 = 4 * (sum of pairwise products)
    e1, e2 = 6.0, 11.0
    assert e1**2 != 4 * e2


def test_degenerate():
    with pytest.raises(DegenerateCubicError):
        real_cubic_roots(0, 1, 1, 1)
    with pytest.raises(DegenerateCubicError):
        cubic_roots_trig(0.0, 1.0, 1.0)


@given(
    st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
    st.floats(0.1, 10.0),
)
def test_solver_on_random_real_roots(roots, lead):
    roots = sorted(roots)
    a = lead
    b = -a * sum(roots)
    c = a * (roots[0] * roots[1] + roots[0] * roots[2] + roots[1] * roots[2])
    d = -a * roots[0] * roots[1] * roots[2]
    got = real_cubic_roots(a, b, c, d)
    scale = max(1.0, max(abs(x) for x in roots))
    # each returned value is a root (clustered roots may merge numerically)
    for x in got:
        assert min(abs(x - r) for r in roots) <= 1e-4 * scale
    # the largest root is always found
    assert got[-1] == pytest.approx(roots[-1], abs=1e-4 * scale)


def test_default_coefficients_and_three_real_roots(params):
    A1, A2, A3 = cubic_coefficients(params)
    assert A1 > 0 and A2 < 0 and A3 < 0
    roots = cubic_roots_trig(A1, A2, A3)
    assert len(roots) == 3


def test_roots_match_dense_scan(params):
    """Sign changes of the cubic on a log grid bracket every returned root."""
    A1, A2, A3 = cubic_coefficients(params)
    roots = cubic_roots_trig(A1, A2, A3)
    mp = mpmath.mp
    mp.dps = 60

    def h(x):
        x = mpmath.mpf(x)
        return A1**2 * x**3 + 2 * A1 * A2 * x**2 + A2**2 * x + A3

    xs = np.concatenate([-np.logspace(25, -5, 3000), np.logspace(-5, 25, 3000)])
    vals = [h(x) for x in xs]
    brackets = [(xs[i], xs[i + 1]) for i in range(len(xs) - 1) if mpmath.sign(vals[i]) != mpmath.sign(vals[i + 1])]
    assert len(brackets) == len(roots)
    for (lo, hi), r in zip(brackets, roots):
        assert lo <= r <= hi


def test_root_residual_in_high_precision(params):
    """Residual relative to the size of the largest term, evaluated in extended precision."""
    A1, A2, A3 = cubic_coefficients(params)
    mpmath.mp.dps = 60
    for x in cubic_roots_trig(A1, A2, A3):
        x = mpmath.mpf(x)
        terms = [A1**2 * x**3, 2 * A1 * A2 * x**2, A2**2 * x, mpmath.mpf(A3)]
        res = abs(sum(terms))
        assert res <= 1e-9 * max(abs(t) for t in terms)
    assert abs(h_bar_poly(max(cubic_roots_trig(A1, A2, A3)) * (1 + 1e-6), A1, A2, A3)) > 0


def test_largest_root_above_inflection_and_positive_after(params):
    A1, A2, A3 = cubic_coefficients(params)
    x_max = max(cubic_roots_trig(A1, A2, A3))
    assert x_max > -A2 / A1
    for eps in (1e-6, 1e-3, 1.0):
        assert h_bar_poly(x_max * (1 + eps), A1, A2, A3) > 0


def test_threshold_default_value_and_speed(params):
    t0 = time.perf_counter()
    rep = omega_threshold(params)
    assert time.perf_counter() - t0 < 1.0
    assert 137.3 <= rep.omega_threshold <= 138.3
    assert rep.branch == "cubic"
    assert rep.omega_threshold_scaled == pytest.approx(rep.omega_threshold * params.lambda_e)
    assert rep.omega_threshold_scaled >= params.lambda_e * (e_max_u(params) + params.E_max_h)


def test_threshold_grows_with_v(params):
    vals = [omega_threshold(params.replace(V=v)).omega_threshold for v in (16e7, 64e7, 256e7, 1024e7)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_spend_condition_at_threshold(params):
    """The worst-case low-battery spend fits under the cutoff at the threshold and not below the cubic bound."""
    rep = omega_threshold(params)
    p = params
    assert h_of_omega(rep.omega_threshold_scaled, p) <= p.b_min_s * (1 + 1e-9)
    # x_max solves the condition with equality once the e_max_u shift is added back
    at_bound = rep.x_max + p.lambda_e * rep.e_max_u
    assert h_of_omega(at_bound, p) == pytest.approx(p.b_min_s, rel=1e-6)
    assert h_of_omega(at_bound * (1 - 1e-3), p) > p.b_min_s


def test_root_residual_against_constant_term(params):
    A1, A2, A3 = cubic_coefficients(params)
    for x in cubic_roots_trig(A1, A2, A3):
        assert abs(h_bar_poly(x, A1, A2, A3)) <= 1e-6 * abs(A3)
