import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpspec import (
    InvalidInputError,
    NumericError,
    OrbitPoleError,
    golden_cf,
    lyapunov,
    make_amo,
    make_custom,
    make_maryland,
    product,
    product_inverse,
    step_A,
    step_D,
    step_F,
    uniform_bound_check,
)
from qpspec.cocycle import TransferMatrix2, spectral_norm_2x2


def _mat_close(m1, m2, tol):
    return max(abs(float(m1.a - m2.a)), abs(float(m1.b - m2.b)),
               abs(float(m1.c - m2.c)), abs(float(m1.d - m2.d))) < tol


# ---------------------------------------------------------------------------
# single steps


def test_step_A_is_unimodular(maryland1):
    with mp.workprec(80):
        s = step_A(maryland1, mp.mpf(1.5), mp.mpf(0.3))
        assert abs(s.det() - 1) < mp.mpf(2) ** -70


def test_step_D_det_is_f_squared(maryland1):
    with mp.workprec(80):
        x = mp.mpf(0.3)
        s = step_D(maryland1, mp.mpf(1.5), x)
        assert abs(s.det() - maryland1.f(x) ** 2) < mp.mpf(2) ** -70


def test_step_F_over_f_is_inverse_step(maryland1):
    with mp.workprec(80):
        x = mp.mpf(0.3)
        E = mp.mpf(1.5)
        a = step_A(maryland1, E, x)
        finv = step_F(maryland1, E, x).scaled(1 / maryland1.f(x))
        assert _mat_close(a.matmul(finv), TransferMatrix2.identity(), 1e-20)


def test_step_D_is_f_times_A(maryland1):
    with mp.workprec(80):
        x = mp.mpf(0.3)
        E = mp.mpf(1.5)
        assert _mat_close(step_D(maryland1, E, x),
                          step_A(maryland1, E, x).scaled(maryland1.f(x)), 1e-20)


# ---------------------------------------------------------------------------
# ordered products


@given(st.integers(min_value=0, max_value=12), st.integers(min_value=0, max_value=12))
@settings(max_examples=25, deadline=None)
def test_cocycle_composition_identity(n, m):
    pot = make_amo(1.3)
    cf = golden_cf(20)
    with mp.workprec(100):
        x = mp.mpf(0.21)
        E = mp.mpf(0.7)
        lhs = product(pot, E, x, cf.value, n + m)
        rhs = product(pot, E, x + m * cf.value, cf.value, n).matmul(
            product(pot, E, x, cf.value, m))
        assert _mat_close(lhs, rhs, 1e-15)


def test_negative_window_is_shifted_positive_window(amo2):
    cf = golden_cf(20)
    with mp.workprec(100):
        x = mp.mpf(0.21)
        E = mp.mpf(0.7)
        lhs = product(amo2, E, x, cf.value, -7)
        rhs = product(amo2, E, x - 7 * cf.value, cf.value, 7)
        assert _mat_close(lhs, rhs, 1e-20)


def test_product_inverse_inverts_product(maryland1):
    cf = golden_cf(20)
    with mp.workprec(120):
        x = mp.mpf(0.11)
        E = mp.mpf(0.4)
        fwd = product(maryland1, E, x, cf.value, 9)
        inv = product_inverse(maryland1, E, x, cf.value, 9)
        assert _mat_close(fwd.matmul(inv), TransferMatrix2.identity(), 1e-20)


def test_product_hits_pole(maryland1):
    cf = golden_cf(20)
    with pytest.raises(OrbitPoleError):
        product(maryland1, 0.0, Fraction(1, 2), cf.value, 3)
    with pytest.raises(OrbitPoleError):
        product_inverse(maryland1, 0.0, Fraction(1, 2), cf.value, 3)


def test_spectral_norm_matches_numpy():
    rng = np.random.default_rng(7)
    for _ in range(25):
        m = rng.normal(size=(2, 2))
        got = spectral_norm_2x2(m[0, 0], m[0, 1], m[1, 0], m[1, 1])
        expect = np.linalg.norm(m, 2)
        assert float(got) == pytest.approx(float(expect), rel=1e-12)


# ---------------------------------------------------------------------------
# Lyapunov engine


def test_constant_cocycle_closed_form():
    pot = make_custom([], "const", coupling=0.0)
    cf = golden_cf(30)
    est = lyapunov(pot, 3.0, cf.value, 4000, kind="A")
    target = math.log((3 + math.sqrt(5)) / 2)
    assert est.value == pytest.approx(target, abs=1e-3)


def test_lyapunov_is_deterministic(amo2):
    cf = golden_cf(30)
    e1 = lyapunov(amo2, 0.25, cf.value, 3000)
    e2 = lyapunov(amo2, 0.25, cf.value, 3000)
    assert e1.value == e2.value
    assert e1.discrepancy == e2.discrepancy


def test_kinds_share_the_exponent(maryland1):
    cf = golden_cf(30)
    a = lyapunov(maryland1, 0.0, cf.value, 20000, kind="A")
    d = lyapunov(maryland1, 0.0, cf.value, 20000, kind="D")
    assert a.value == pytest.approx(d.value, rel=0.05)


def test_supercritical_cosine_lower_bound():
    # coupling-based lower bound L(E) >= ln(coupling / 2), uniform in E
    pot = make_amo(4.0)
    cf = golden_cf(30)
    for E in (-1.0, 0.0, 2.0):
        est = lyapunov(pot, E, cf.value, 20000)
        assert est.value >= math.log(2.0) - 0.02


def test_single_orbit_method(amo2):
    cf = golden_cf(30)
    pa = lyapunov(amo2, 0.25, cf.value, 5000, method="phase-average")
    so = lyapunov(amo2, 0.25, cf.value, 5000, method="single-orbit")
    assert so.phases_used == 1
    assert pa.discrepancy == so.discrepancy == abs(pa.value - so.value)


def test_lyapunov_argument_validation(amo2):
    cf = golden_cf(20)
    with pytest.raises(InvalidInputError):
        lyapunov(amo2, 0.0, cf.value, 0)
    with pytest.raises(InvalidInputError):
        lyapunov(amo2, 0.0, cf.value, 10, method="bogus")
    with pytest.raises(InvalidInputError):
        lyapunov(amo2, 0.0, cf.value, 10, kind="Z")


def test_lyapunov_n_not_multiple_of_renorm(amo2):
    cf = golden_cf(30)
    est = lyapunov(amo2, 0.25, cf.value, 4097)
    assert math.isfinite(est.value)


def test_uniform_bound_margins(amo2):
    cf = golden_cf(30)
    rep = uniform_bound_check(amo2, 0.25, cf.value, 4000, epsilon=0.05,
                              sample_x=[0.1, 0.37, 0.62, 0.9])
    assert max(rep.matrix_margins) <= 0.05
    assert rep.max_constant() >= 1.0 or max(rep.matrix_margins) < 0


def test_uniform_bound_scalar_factor(maryland1):
    cf = golden_cf(30)
    rep = uniform_bound_check(
        maryland1, 0.0, cf.value, 4000, epsilon=0.05,
        sample_x=[0.1, 0.37], scalar_func=lambda xs: maryland1.f(xs),
        scalar_log_mean=0.0)
    assert len(rep.scalar_margins) == 2
    assert max(rep.scalar_margins) <= 0.05
