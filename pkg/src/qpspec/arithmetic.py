"""Continued fractions, the torus norm, and the arithmetic indices.

Everything arithmetic lives here: big-integer convergents p_n/q_n, exact
rational checks of the approximation inequalities, and the three indices
(growth index of the denominators, phase resonance index, and the combined
pole/denominator index) as finite-depth limsup surrogates.

Conventions fixed once:
  * convergents start at (p_0, q_0) = (0, 1), (p_1, q_1) = (1, a_1),
    with the virtual (p_{-1}, q_{-1}) = (1, 0) driving the recurrence;
  * a limsup over an infinite sequence is reported as the max of the
    per-level sequence over levels >= tail_start = ceil(M/2), with the
    whole sequence exposed so callers can judge convergence.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath as mp

from .errors import (
    BudgetError,
    ExcludedPhaseError,
    InvalidInputError,
    PrecisionExhaustedError,
    RangeError,
)

__all__ = [
    "ContinuedFraction",
    "TorusPoint",
    "IndexValue",
    "cf_from_coeffs",
    "cf_from_real",
    "cf_to_text",
    "cf_from_text",
    "golden_cf",
    "silver_cf",
    "liouville_cf",
    "torus_norm",
    "torus_norm_exact",
    "beta",
    "gamma",
    "delta_index",
    "min_sine_index",
    "sine_product_check",
    "qualifying_levels",
    "as_mpf",
    "exact_fraction",
]


# ---------------------------------------------------------------------------
# number plumbing


def exact_fraction(x):
    """Exact rational value of a float / mpf / Fraction / int / decimal string."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(*x.as_integer_ratio())
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, mp.mpf):
        sign, man, exp, _ = x._mpf_
        man = int(man)
        if sign:
            man = -man
        if exp >= 0:
            return Fraction(man * (1 << exp))
        return Fraction(man, 1 << (-exp))
    raise InvalidInputError(f"cannot interpret {type(x).__name__} as an exact rational")


def as_mpf(x):
    """Convert to mpf at the *current* working precision."""
    if isinstance(x, TorusPoint):
        return x.value
    if isinstance(x, Fraction):
        return mp.mpf(x.numerator) / mp.mpf(x.denominator)
    return mp.mpf(x)


def torus_norm(x):
    """Distance from x to the nearest integer; in [0, 1/2]."""
    if isinstance(x, Fraction):
        return torus_norm_exact(x)
    x = as_mpf(x)
    r = x - mp.floor(x)
    return min(r, 1 - r)


def torus_norm_exact(x: Fraction) -> Fraction:
    r = x - (x.numerator // x.denominator)
    return min(r, 1 - r)


@dataclass(frozen=True)
class TorusPoint:
    """A point of R/Z held at an explicit binary precision."""

    value: mp.mpf
    precision: int

    def __post_init__(self):
        if not (0 <= self.value < 1):
            raise InvalidInputError("torus point must be reduced into [0, 1)")

    @property
    def norm(self):
        return min(self.value, 1 - self.value)


def torus_point(x, precision: int = 64) -> TorusPoint:
    with mp.workprec(precision):
        v = as_mpf(x)
        v = v - mp.floor(v)
    return TorusPoint(v, precision)


# ---------------------------------------------------------------------------
# continued fractions


@dataclass(frozen=True)
class ContinuedFraction:
    """Coefficients a_1..a_N and big-integer convergents of an alpha in (0,1).

    ``p`` and ``q`` have length N+1 and are indexed by level, so q[n] is q_n
    with q[0] = 1.  ``value`` is alpha at ``precision`` bits; for expansions
    recovered from a real number, ``valid_prefix`` marks how many leading
    coefficients are certified by the input's precision (always equal to
    len(coefficients): uncertified coefficients are never emitted).
    """

    coefficients: tuple[int, ...]
    p: tuple[int, ...]
    q: tuple[int, ...]
    value: mp.mpf
    precision: int
    valid_prefix: int

    @property
    def depth(self) -> int:
        return len(self.coefficients)

    @property
    def convergents(self) -> list[tuple[int, int]]:
        return list(zip(self.p, self.q))

    def as_fraction(self) -> Fraction:
        """The deepest convergent p_N/q_N, the exact finite surrogate."""
        return Fraction(self.p[-1], self.q[-1])

    def knorm_exact(self, k: int) -> Fraction:
        """Exact ||k*alpha|| for the finite surrogate alpha = p_N/q_N."""
        return torus_norm_exact(k * self.as_fraction())

    def approx_dist_exact(self, n: int) -> Fraction:
        """Exact |q_n alpha - p_n| for the finite surrogate.

        Coincides with ||q_n alpha|| for n >= 1, where p_n is the nearest
        integer to q_n alpha; at n = 0 it keeps the designated numerator p_0.
        """
        if not 0 <= n <= self.depth:
            raise RangeError(f"level {n} outside stored depth {self.depth}")
        return abs(self.q[n] * self.as_fraction() - self.p[n])

    def check_gap_bounds(self, n: int) -> bool:
        """1/(2 q_{n+1}) <= |q_n alpha - p_n| <= 1/q_{n+1} in exact arithmetic.

        Valid for levels n <= depth-2 of the finite surrogate.
        """
        if not 0 <= n <= self.depth - 2:
            raise RangeError(f"level {n} outside exactly-checkable range 0..{self.depth - 2}")
        nrm = self.approx_dist_exact(n)
        qn1 = self.q[n + 1]
        return Fraction(1, 2 * qn1) <= nrm <= Fraction(1, qn1)


def _convergents(coeffs: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    p_prev, q_prev = 1, 0  # virtual level -1
    p, q = [0], [1]
    for a in coeffs:
        p_new = a * p[-1] + p_prev
        q_new = a * q[-1] + q_prev
        p_prev, q_prev = p[-1], q[-1]
        p.append(p_new)
        q.append(q_new)
    return tuple(p), tuple(q)


def cf_from_coeffs(coeffs: Iterable[int]) -> ContinuedFraction:
    coeffs = tuple(int(a) for a in coeffs)
    if not coeffs:
        raise InvalidInputError("empty coefficient list")
    for i, a in enumerate(coeffs):
        if a < 1:
            raise InvalidInputError(f"coefficient a_{i + 1} = {a} must be >= 1")
    p, q = _convergents(coeffs)
    precision = 64 + 2 * q[-1].bit_length()
    with mp.workprec(precision):
        value = mp.mpf(p[-1]) / mp.mpf(q[-1])
    return ContinuedFraction(coeffs, p, q, value, precision, len(coeffs))


def _expand_fraction(x: Fraction, max_terms: int) -> list[int]:
    """Continued-fraction coefficients of x in (0, 1); terminates for rationals."""
    coeffs: list[int] = []
    num, den = x.numerator, x.denominator
    while num != 0 and len(coeffs) < max_terms:
        a, r = divmod(den, num)
        coeffs.append(a)
        den, num = num, r
    return coeffs


def cf_from_real(alpha, max_terms: int, precision: int | None = None,
                 exact: bool = False) -> ContinuedFraction:
    """Expand a real alpha in (0, 1), emitting only precision-certified terms.

    The input is treated as a dyadic/rational point known to +-1 ulp at
    ``precision`` bits; coefficients are kept while the expansions of both
    interval endpoints agree.  With ``exact=True`` (or a Fraction input) the
    value is taken at face value and the terminating expansion is returned.
    """
    if max_terms < 1:
        raise InvalidInputError("max_terms must be >= 1")
    if precision is None:
        if isinstance(alpha, mp.mpf):
            precision = mp.prec
        elif isinstance(alpha, float):
            precision = 53
        else:
            precision = 64
    x = exact_fraction(alpha)
    if not 0 < x < 1:
        raise InvalidInputError("alpha must lie in (0, 1)")
    if exact or isinstance(alpha, (Fraction, str)):
        coeffs = _expand_fraction(x, max_terms)
    else:
        ulp = Fraction(1, 1 << precision)
        if x - ulp <= 0 or x + ulp >= 1:
            raise PrecisionExhaustedError(
                f"alpha is within one ulp of the interval boundary at {precision} bits")
        lo = _expand_fraction(x - ulp, max_terms + 1)
        hi = _expand_fraction(x + ulp, max_terms + 1)
        coeffs = []
        for a, b in zip(lo, hi):
            if a != b:
                break
            coeffs.append(a)
        coeffs = coeffs[:max_terms]
        if not coeffs:
            raise PrecisionExhaustedError(
                f"precision ({precision} bits) certifies no coefficients")
    cf = cf_from_coeffs(coeffs)
    work = max(cf.precision, precision)
    with mp.workprec(work):
        value = as_mpf(x)
    return ContinuedFraction(cf.coefficients, cf.p, cf.q, value, work, len(coeffs))


def cf_to_text(cf: ContinuedFraction) -> str:
    """One decimal coefficient per line."""
    return "\n".join(str(a) for a in cf.coefficients) + "\n"


def cf_from_text(text: str) -> ContinuedFraction:
    lines = [ln.strip() for ln in text.splitlines()]
    coeffs = []
    for ln in lines:
        if not ln or ln.startswith("#"):
            continue
        try:
            coeffs.append(int(ln))
        except ValueError as exc:
            raise InvalidInputError(f"bad coefficient line: {ln!r}") from exc
    return cf_from_coeffs(coeffs)


def golden_cf(terms: int = 40) -> ContinuedFraction:
    return cf_from_coeffs([1] * terms)


def silver_cf(terms: int = 40) -> ContinuedFraction:
    return cf_from_coeffs([2] * terms)


def liouville_cf(beta_target: float, terms: int,
                 first_coeff: int = 1, max_coeff_bits: int = 4096) -> ContinuedFraction:
    """Frequency whose denominator growth index tracks ``beta_target``.

    Picks a_{n+1} ~ ceil(e^{beta_target * q_n} / q_n) so that
    ln q_{n+1} / q_n -> beta_target; coefficients are capped at
    ``max_coeff_bits`` bits to stay representable, after which the growth
    index of the remaining levels decays (the construction is Liouville-like
    only on the uncapped prefix).
    """
    if beta_target <= 0:
        raise InvalidInputError("beta_target must be positive")
    coeffs = [int(first_coeff)]
    if coeffs[0] < 1:
        raise InvalidInputError("first_coeff must be >= 1")
    _, q = _convergents(coeffs)
    while len(coeffs) < terms:
        qn = q[-1]
        if qn.bit_length() > 60:  # e^{beta qn} is far past any sane cap
            bits_needed = max_coeff_bits + 1
        else:
            bits_needed = int(beta_target * qn / math.log(2)) + 80
        if bits_needed > max_coeff_bits:
            a = 1 << max_coeff_bits
        else:
            with mp.workprec(bits_needed):
                a = int(mp.ceil(mp.e ** (mp.mpf(beta_target) * qn) / qn))
            a = max(a, 1)
        coeffs.append(a)
        _, q = _convergents(coeffs)
    return cf_from_coeffs(coeffs)


# ---------------------------------------------------------------------------
# index values


@dataclass(frozen=True)
class IndexValue:
    """Finite-depth limsup surrogate: max of per_level over the stored tail."""

    value: float
    per_level: tuple[float, ...]
    tail_start: int  # 1-based level index where the tail max begins
    terms_used: int
    witness: int | None = None
    resolution_limited: tuple[int, ...] = ()

    def band(self) -> tuple[float, float]:
        """(lower, upper) surrogate pair: tail maxima over the last
        ceil(M/4) and ceil(M/2) levels."""
        m = len(self.per_level)
        lo_win = self.per_level[m - _ceil_div(m, 4):]
        hi_win = self.per_level[m - _ceil_div(m, 2):]
        return max(lo_win), max(hi_win)

    def to_json_dict(self) -> dict:
        return {
            "value": _json_num(self.value),
            "per_level": [_json_num(v) for v in self.per_level],
            "tail_start": self.tail_start,
            "terms_used": self.terms_used,
            "witness": self.witness,
            "resolution_limited": list(self.resolution_limited),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _json_num(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return v


def _surrogate(per_level: Sequence[float], **kw) -> IndexValue:
    m = len(per_level)
    tail_start = max(1, _ceil_div(m, 2))
    value = max(per_level[tail_start - 1:])
    return IndexValue(value=value, per_level=tuple(per_level),
                      tail_start=tail_start, terms_used=m, **kw)


def qualifying_levels(iv: IndexValue, epsilon: float) -> list[int]:
    """Levels n (1-based) with per_level_n > value - epsilon/4.

    These are the levels along which the subsequence extraction in the
    product lower bounds is valid.
    """
    if epsilon <= 0:
        raise InvalidInputError("epsilon must be positive")
    cut = iv.value - epsilon / 4
    return [n for n, v in enumerate(iv.per_level, start=1)
            if v > cut and math.isfinite(v)]


# ---------------------------------------------------------------------------
# the indices


def _require_depth(cf: ContinuedFraction, need: int):
    if cf.depth < need:
        raise RangeError(f"continued fraction too shallow: {cf.depth} < {need}")


def _delta_per_level(cf: ContinuedFraction, theta, poles) -> tuple[list[float], list[int]]:
    """Per-level sequence (sum_i ln||q_n (theta-theta_i)|| + ln q_{n+1}) / q_n.

    Runs at cf.precision; results whose torus norms fall below the resolution
    floor 2^(-precision/2) are flagged rather than trusted.  With no poles the
    pole sum is empty and the sequence is exactly ln q_{n+1} / q_n.
    """
    levels: list[float] = []
    limited: list[int] = []
    with mp.workprec(cf.precision):
        floor = mp.mpf(2) ** (-(cf.precision // 2))
        diffs = None
        if poles:
            th = as_mpf(theta)
            diffs = [th - as_mpf(pl) for pl in poles]
        for n in range(1, cf.depth):
            qn = cf.q[n]
            acc = mp.mpf(0)
            if diffs:
                for dd in diffs:
                    nrm = torus_norm(qn * dd)
                    if 0 < nrm < floor:
                        limited.append(n)
                    acc += mp.log(nrm)
            acc += mp.log(mp.mpf(cf.q[n + 1]))
            levels.append(float(acc / qn))
    return levels, limited


def beta(cf: ContinuedFraction) -> IndexValue:
    """Growth index of the approximation denominators, limsup ln q_{n+1}/q_n."""
    _require_depth(cf, 2)
    levels, _ = _delta_per_level(cf, None, [])
    return _surrogate(levels)


def delta_index(cf: ContinuedFraction, theta, poles: Sequence,
                horizon: int = 1000) -> IndexValue:
    """Combined pole-resonance/denominator-growth index.

    ``poles`` lists pole positions with multiplicity (repeats).  The phase is
    rejected if it sits, within resolution, on a lattice translate
    theta_l + k*alpha + Z for |k| <= horizon.
    """
    _require_depth(cf, 2)
    poles = list(poles)
    if poles:
        _check_excluded_phase(cf, theta, poles, horizon)
    levels, limited = _delta_per_level(cf, theta, poles)
    return _surrogate(levels, resolution_limited=tuple(limited))


def _check_excluded_phase(cf: ContinuedFraction, theta, poles, horizon: int):
    with mp.workprec(cf.precision):
        floor = mp.mpf(2) ** (-(cf.precision // 2))
        th = as_mpf(theta)
        alpha = cf.value
        for pl in poles:
            base = th - as_mpf(pl)
            for k in range(-horizon, horizon + 1):
                if torus_norm(base - k * alpha) < floor:
                    raise ExcludedPhaseError(
                        f"phase is within resolution of pole {pl} translated by "
                        f"{k}*alpha", pole=pl, translate=k)


def gamma(cf: ContinuedFraction, theta, n_max: int = 10000) -> IndexValue:
    """Phase resonance index: limsup over n != 0 of -ln||2 theta + n alpha||/|n|.

    An exact (resolution-limited) resonance within the scan yields +inf with
    the witnessing n recorded.
    """
    if n_max < 1:
        raise InvalidInputError("n_max must be >= 1")
    levels: list[float] = []
    limited: list[int] = []
    with mp.workprec(cf.precision):
        floor = mp.mpf(2) ** (-(cf.precision // 2))
        alpha = cf.value
        base = as_mpf(theta) * 2
        xp = base
        xm = base
        for n in range(1, n_max + 1):
            xp = xp + alpha
            xp -= mp.floor(xp)
            xm = xm - alpha
            xm -= mp.floor(xm)
            np_ = min(xp, 1 - xp)
            nm_ = min(xm, 1 - xm)
            for sgn, nrm in ((n, np_), (-n, nm_)):
                if nrm < floor:
                    return IndexValue(value=math.inf, per_level=tuple(levels),
                                      tail_start=1, terms_used=n, witness=sgn,
                                      resolution_limited=(n,))
            levels.append(float(max(-mp.log(np_), -mp.log(nm_)) / n))
    return _surrogate(levels, resolution_limited=tuple(limited))


# ---------------------------------------------------------------------------
# sine products (orbit products over one denominator window)


def min_sine_index(theta, cf: ContinuedFraction, n: int,
                   budget: int = 2_000_000) -> tuple[int, mp.mpf]:
    """Index j0 in [0, q_n) minimising |sin pi(theta + j alpha)|, ties to the
    smallest j, together with the attained value."""
    if not 0 <= n <= cf.depth:
        raise RangeError(f"level {n} outside stored depth {cf.depth}")
    qn = cf.q[n]
    if qn > budget:
        raise BudgetError(f"q_{n} = {qn} exceeds step budget {budget}")
    with mp.workprec(cf.precision):
        alpha = cf.value
        x = as_mpf(theta)
        x -= mp.floor(x)
        best_j, best = 0, min(x, 1 - x)
        for j in range(1, qn):
            x += alpha
            if x >= 1:
                x -= 1
            nrm = min(x, 1 - x)
            if nrm < best:
                best_j, best = j, nrm
        # |sin pi t| is increasing in the torus norm of t
        return best_j, mp.sinpi(best)


def sine_product_check(theta, cf: ContinuedFraction, n: int,
                       budget: int = 2_000_000) -> tuple[float, float]:
    """Centered log sine product over one denominator window.

    Returns (S, ln q_n) with
    S = sum_{j != j0} ln|sin pi(theta + j alpha)| + (q_n - 1) ln 2;
    boundedness of |S| / ln q_n is the caller's assertion.
    """
    j0, _ = min_sine_index(theta, cf, n, budget=budget)
    qn = cf.q[n]
    with mp.workprec(cf.precision):
        alpha = cf.value
        x = as_mpf(theta)
        x -= mp.floor(x)
        s = mp.mpf(0)
        for j in range(qn):
            if j != j0:
                s += mp.log(mp.sinpi(min(x, 1 - x)))
            x += alpha
            if x >= 1:
                x -= 1
        s += (qn - 1) * mp.log(2)
        return float(s), float(mp.log(qn))
