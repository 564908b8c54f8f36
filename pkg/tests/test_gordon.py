import math
from fractions import Fraction

import mpmath as mp
import pytest

from qpspec import (
    NumericError,
    RangeError,
    SubsequenceError,
    bounded_candidate,
    contracted_direction,
    delta_index,
    exclusion_certificate,
    gordon_lhs,
    gordon_matrices,
    golden_cf,
    smallness_check,
    liouville_cf,
    lyapunov,
    make_amo,
    make_maryland,
    max_inequality,
    product,
    solve_recurrence,
    trace_dichotomy,
)
from qpspec.arithmetic import as_mpf
from qpspec.cocycle import TransferMatrix2


def _mat_close(m1, m2, tol):
    return max(abs(float(m1.a - m2.a)), abs(float(m1.b - m2.b)),
               abs(float(m1.c - m2.c)), abs(float(m1.d - m2.d))) < tol


# ---------------------------------------------------------------------------
# solution segments


def test_solve_recurrence_satisfies_three_term(maryland1):
    cf = golden_cf(20)
    seg = solve_recurrence(maryland1, 0.3, Fraction(1, 7), (1, 0), (-12, 12),
                           cf.value, precision=120)
    assert seg.max_residual(maryland1, precision=120) < 1e-25


def test_solve_recurrence_matches_product(amo2):
    cf = golden_cf(20)
    with mp.workprec(120):
        seg = solve_recurrence(amo2, 0.3, Fraction(1, 7), (0.6, 0.8), (-10, 10),
                               cf.value, precision=120)
        fwd = product(amo2, mp.mpf(0.3), as_mpf(Fraction(1, 7)), cf.value, 8)
        expect = fwd.apply(seg.initial)
        got = seg.vec(8)
        assert abs(float(got[0] - expect[0])) < 1e-25
        assert abs(float(got[1] - expect[1])) < 1e-25


def test_solve_recurrence_window_guard(amo2):
    cf = golden_cf(20)
    with pytest.raises(RangeError):
        solve_recurrence(amo2, 0.3, 0.1, (1, 0), (1, 5), cf.value)
    seg = solve_recurrence(amo2, 0.3, 0.1, (1, 0), (-3, 3), cf.value)
    with pytest.raises(RangeError):
        seg.phi(4)


# ---------------------------------------------------------------------------
# the q-scale matrices


def test_gordon_matrices_consistency(amo2):
    cf = golden_cf(20)
    q = cf.q[6]  # 13
    mats = gordon_matrices(amo2, 0.4, Fraction(1, 7), cf.value, q)
    with mp.workprec(mats.precision):
        # A_2q is the fresh 2q-step product and factors through the q-shift
        direct = product(amo2, mp.mpf(0.4), as_mpf(Fraction(1, 7)), cf.value,
                         2 * q)
        assert _mat_close(mats.A_2q, direct, 1e-20)
        shifted = product(amo2, mp.mpf(0.4),
                          as_mpf(Fraction(1, 7)) + q * cf.value, cf.value, q)
        assert _mat_close(mats.A_2q, shifted.matmul(mats.A_q), 1e-18)
        # inverse products really invert
        assert _mat_close(mats.A_q.matmul(mats.Ainv_q),
                          TransferMatrix2.identity(), 1e-18)
        assert abs(float(mats.A_q.det()) - 1.0) < 1e-15


def test_gordon_lhs_rejects_unresolvable_difference(amo2):
    # alpha = 1/4 exactly: the q=4 window repeats, the true difference is
    # zero, and what remains is rounding noise below the precision floor
    with pytest.raises(NumericError):
        gordon_lhs(amo2, 0.4, Fraction(1, 7), Fraction(1, 4), 4)


def test_gordon_lhs_log_survives_underflow():
    cf = liouville_cf(math.log(4.0), 4)
    pot = make_amo(2.0)
    lhs = gordon_lhs(pot, 0.5, Fraction(1, 10), cf.value, cf.q[3])
    # the true differences are far below float64 range but nonzero
    assert lhs.square == 0.0 or lhs.square < 1e-300
    assert -2500 < lhs.square_log < -100
    assert -2500 < lhs.inverse_log < -100


# ---------------------------------------------------------------------------
# candidate directions


def test_bounded_candidate_bounds_its_own_orbit(amo2):
    cf = golden_cf(20)
    q = 5
    v, C = bounded_candidate(amo2, 0.5, Fraction(1, 7), cf.value, q)
    assert math.hypot(*v) == pytest.approx(1.0, abs=1e-12)
    seg = solve_recurrence(amo2, 0.5, Fraction(1, 7), v, (-q - 2, 2 * q),
                           cf.value, precision=120)
    worst = max(seg.vec_norm(k) for k in range(-q - 1, 2 * q + 1))
    assert worst <= C * (1 + 1e-6)


def test_contracted_direction_is_unit_and_deterministic(maryland1):
    cf = golden_cf(20)
    v1 = contracted_direction(maryland1, 0.2, Fraction(1, 7), cf.value, 13)
    v2 = contracted_direction(maryland1, 0.2, Fraction(1, 7), cf.value, 13)
    assert v1 == v2
    assert math.hypot(*v1) == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# trace dichotomy and the max inequality


def test_trace_dichotomy_residuals_are_tiny(amo2, maryland1):
    cf = golden_cf(20)
    for pot in (amo2, maryland1):
        rep = trace_dichotomy(pot, 0.4, Fraction(1, 7), cf.value, cf.q[6])
        assert rep.residual_linear < 1e-12
        assert rep.residual_square < 1e-12
        assert rep.case in ("|tr|>1/2", "|tr|<1/2", "|tr|=1/2")


def test_max_inequality_requires_coverage(amo2):
    cf = golden_cf(20)
    seg = solve_recurrence(amo2, 0.5, Fraction(1, 7), (1, 0), (-3, 3), cf.value)
    with pytest.raises(RangeError):
        max_inequality(seg, 5)


def test_max_inequality_on_frozen_config():
    cf = liouville_cf(1.0, 4)
    pot = make_maryland(0.15)
    theta = Fraction(3, 8)
    q = cf.q[3]
    v = contracted_direction(pot, 0.0, theta, cf.value, q)
    seg = solve_recurrence(pot, 0.0, theta, v, (-q - 1, 2 * q), cf.value,
                           precision=600)
    mx, verdict = max_inequality(seg, q)
    assert verdict == "excluded"
    assert mx >= 0.25 - 1e-6


# ---------------------------------------------------------------------------
# smallness checks and certificates


def test_smallness_rejects_non_qualifying_level():
    cf = liouville_cf(1.0, 4)
    pot = make_maryland(0.15)
    theta = Fraction(3, 8)
    d = delta_index(cf, theta, pot.poles)
    L = 0.08
    with pytest.raises(SubsequenceError):
        smallness_check(pot, 0.0, theta, cf.value, cf, 1, 0.2, L, delta_iv=d)


def test_smallness_passes_on_frozen_config():
    cf = liouville_cf(1.0, 4)
    pot = make_maryland(0.15)
    theta = Fraction(3, 8)
    d = delta_index(cf, theta, pot.poles)
    L = lyapunov(pot, 0.0, cf.value, 20000).value
    chk = smallness_check(pot, 0.0, theta, cf.value, cf, 3, 0.2, L, delta_iv=d)
    assert not chk.vacuous
    assert chk.passed
    assert chk.empirical_rate >= 1e-2


def test_exclusion_certificate_level_guard():
    cf = liouville_cf(1.0, 4)
    pot = make_maryland(0.15)
    with pytest.raises(RangeError):
        exclusion_certificate(pot, 0.0, Fraction(3, 8), cf.value, cf, [9], 1e-2)


def test_exclusion_certificate_on_frozen_config():
    cf = liouville_cf(1.0, 4)
    pot = make_maryland(0.15)
    certs = exclusion_certificate(pot, 0.0, Fraction(3, 8), cf.value, cf, [3],
                                  1e-2, n_directions=60)
    (c,) = certs
    assert c.verdict == "excluded"
    assert c.max_norm >= 0.25 - 1e-6
    assert c.directions_tested == 62
    assert c.empirical_rate >= 1e-2
