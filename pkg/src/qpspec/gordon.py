"""Eigenvalue-exclusion certificates from near-periodicity at denominator scales.

The engine: at a denominator q of the frequency, the four high-precision
matrices A_q(theta), A_{2q}(theta), A_q^{-1}(theta) and A_q^{-1}(theta - q a)
are built in one pass (A_{2q} as a fresh 2q-step product, never as the square
of A_q, since the certificate measures exactly the gap between the two).
Working precision is sized from a cheap float pre-pass over the orbit so the
exponentially small differences survive the cancellation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import mpmath as mp
import numpy as np

from .arithmetic import ContinuedFraction, IndexValue, as_mpf, qualifying_levels
from .cocycle import TransferMatrix2, spectral_norm_2x2, step_A, step_F
from .errors import InvalidInputError, NumericError, RangeError, SubsequenceError
from .potential import MeromorphicPotential

__all__ = [
    "SolutionSegment",
    "GordonCertificate",
    "GordonMatrices",
    "SmallnessCheck",
    "TraceReport",
    "solve_recurrence",
    "gordon_matrices",
    "gordon_lhs",
    "max_inequality",
    "trace_dichotomy",
    "smallness_check",
    "exclusion_certificate",
    "bounded_candidate",
    "contracted_direction",
]

MAX_NORM_TOL = 1e-6


# ---------------------------------------------------------------------------
# solution segments


@dataclass(frozen=True)
class SolutionSegment:
    """Values of a formal solution over k in [k_min, k_max], reconstructed by
    transfer-matrix steps from a unit initial pair (phi_0, phi_{-1})."""

    E: float
    theta: object
    initial: tuple
    k_min: int
    k_max: int
    values: tuple

    def phi(self, k: int):
        if not self.k_min <= k <= self.k_max:
            raise RangeError(f"k={k} outside segment [{self.k_min}, {self.k_max}]")
        return self.values[k - self.k_min]

    def vec(self, k: int):
        """(phi_k, phi_{k-1})."""
        return (self.phi(k), self.phi(k - 1))

    def vec_norm(self, k: int) -> float:
        a, b = self.vec(k)
        return float(mp.sqrt(a * a + b * b))

    def max_residual(self, pot: MeromorphicPotential,
                     precision: int | None = None) -> float:
        """Largest relative residual of the three-term recurrence."""
        from .potential import eval_V

        worst = 0.0
        with mp.workprec(precision or mp.mp.prec):
            for k in range(self.k_min + 1, self.k_max):
                v = eval_V(pot, self.theta + k * self._alpha)
                lhs = self.phi(k + 1) + self.phi(k - 1) + v * self.phi(k)
                rhs = self.E * self.phi(k)
                scale = max(abs(lhs), abs(rhs), abs(v * self.phi(k)), 1)
                worst = max(worst, float(abs(lhs - rhs) / scale))
        return worst

    # alpha is needed for residuals; carried out-of-band to keep values compact
    _alpha: object = field(default=None, compare=False)


def solve_recurrence(pot: MeromorphicPotential, E, theta, initial,
                     k_range: tuple[int, int], alpha,
                     precision: int | None = None) -> SolutionSegment:
    """Fill phi over [k_min, k_max] in both directions from (phi_0, phi_{-1}).

    The initial pair is normalised to unit length.  A pole inside the window
    propagates as an orbit error.
    """
    k_min, k_max = k_range
    if k_min > -1 or k_max < 0:
        raise RangeError("window must contain [-1, 0]")
    if precision is None:
        precision = mp.mp.prec
    with mp.workprec(precision):
        av = as_mpf(alpha)
        th = as_mpf(theta)
        v0 = as_mpf(initial[0])
        v1 = as_mpf(initial[1])
        nrm = mp.sqrt(v0 * v0 + v1 * v1)
        if nrm == 0:
            raise InvalidInputError("initial vector must be nonzero")
        v0, v1 = v0 / nrm, v1 / nrm
        vals = {0: v0, -1: v1}
        # forward: (phi_{k+1}, phi_k) = A(theta + k a) (phi_k, phi_{k-1})
        cur = (v0, v1)
        for k in range(0, k_max):
            s = step_A(pot, E, th + k * av)
            cur = s.apply(cur)
            vals[k + 1] = cur[0]
        # backward: (phi_k, phi_{k-1}) = A^{-1}(theta + k a) (phi_{k+1}, phi_k)
        cur = (v0, v1)
        for k in range(-1, k_min - 1, -1):
            s = step_A(pot, E, th + k * av).inv()
            cur = s.apply(cur)
            vals[k - 1] = cur[1]
        values = tuple(vals[k] for k in range(k_min, k_max + 1))
        return SolutionSegment(E=float(E), theta=th, initial=(v0, v1),
                               k_min=k_min, k_max=k_max, values=values,
                               _alpha=av)


# ---------------------------------------------------------------------------
# high-precision matrix assembly


@dataclass(frozen=True)
class GordonMatrices:
    """The four q-scale products, at a common working precision."""

    q: int
    precision: int
    A_q: TransferMatrix2
    A_2q: TransferMatrix2
    Ainv_q: TransferMatrix2
    Ainv_q_shift: TransferMatrix2  # A_q^{-1}(theta - q alpha)


def _orbit_log_norm_estimate(pot: MeromorphicPotential, E: float, alpha: float,
                             theta: float, q: int) -> float:
    """Float pre-pass: sum over the window [-q, 2q) of ln of a per-step norm
    bound, used only to size the working precision."""
    ks = np.arange(-q, 2 * q, dtype=float)
    X = np.mod(theta + ks * alpha, 1.0)
    V = pot.V_array(X, cap=1e250)
    row = np.abs(E - V) + 1.0
    return float(np.sum(np.log(np.maximum(row, 2.0))))


def gordon_matrices(pot: MeromorphicPotential, E, theta, alpha, q: int,
                    precision: int | None = None) -> GordonMatrices:
    """Build A_q, A_{2q}, A_q^{-1} and the shifted A_q^{-1} in one sweep."""
    if q < 1:
        raise InvalidInputError("q must be >= 1")
    if precision is None:
        s = _orbit_log_norm_estimate(pot, float(E), float(as_mpf(alpha)),
                                     float(as_mpf(theta)) % 1.0, q)
        precision = 192 + int(2.2 * s / math.log(2))
    with mp.workprec(precision):
        av = as_mpf(alpha)
        th = as_mpf(theta)
        Ev = as_mpf(E)
        acc = TransferMatrix2.identity()
        A_q = None
        for j in range(2 * q):
            acc = step_A(pot, Ev, th + j * av).matmul(acc)
            if j == q - 1:
                A_q = acc
        A_2q = acc
        Ainv_q = _inverse_product(pot, Ev, th, av, q)
        Ainv_shift = _inverse_product(pot, Ev, th - q * av, av, q)
    return GordonMatrices(q=q, precision=precision, A_q=A_q, A_2q=A_2q,
                          Ainv_q=Ainv_q, Ainv_q_shift=Ainv_shift)


def _inverse_product(pot, E, x, alpha, q):
    acc = TransferMatrix2.identity()
    for j in range(q):
        xj = x + j * alpha
        fv = pot.f(as_mpf(xj)) if pot.m else mp.mpf(1)
        if pot.m and abs(fv) == 0:
            from .errors import OrbitPoleError

            raise OrbitPoleError("exact pole on inverse-orbit window", step=j)
        acc = acc.matmul(step_F(pot, E, xj).scaled(1 / fv))
    return acc


def _vec_norm(v):
    return mp.sqrt(v[0] * v[0] + v[1] * v[1])


class GordonLhs(NamedTuple):
    """Certificate left-hand sides; the ``*_log`` fields survive float64
    underflow (they are -inf only when no difference was detected at all)."""

    square: float
    inverse: float
    square_log: float
    inverse_log: float


def gordon_lhs(pot: MeromorphicPotential, E, theta, alpha, q: int, v=(1, 0),
               mats: GordonMatrices | None = None) -> GordonLhs:
    """The two certificate left-hand sides at scale q for initial vector v:

        ||(A_q^2 - A_{2q})(theta) v||  and
        ||(A_q^{-1}(theta) - A_q^{-1}(theta - q alpha)) v||.
    """
    if mats is None:
        mats = gordon_matrices(pot, E, theta, alpha, q)
    with mp.workprec(mats.precision):
        vv = (as_mpf(v[0]), as_mpf(v[1]))
        nrm = _vec_norm(vv)
        vv = (vv[0] / nrm, vv[1] / nrm)
        w_sq = mats.A_q.apply(mats.A_q.apply(vv))
        w_2q = mats.A_2q.apply(vv)
        lhs_square = _vec_norm((w_sq[0] - w_2q[0], w_sq[1] - w_2q[1]))
        u0 = mats.Ainv_q.apply(vv)
        u1 = mats.Ainv_q_shift.apply(vv)
        lhs_inverse = _vec_norm((u0[0] - u1[0], u0[1] - u1[1]))
        _check_resolution(mats, lhs_square, lhs_inverse)
        return GordonLhs(
            square=float(lhs_square), inverse=float(lhs_inverse),
            square_log=float(mp.log(lhs_square)) if lhs_square > 0 else -math.inf,
            inverse_log=float(mp.log(lhs_inverse)) if lhs_inverse > 0 else -math.inf)


def _check_resolution(mats: GordonMatrices, *values):
    """Differences must sit clearly above the rounding floor of the products."""
    scale = max(float(mp.log(mats.A_2q.norm())), 1.0)
    floor_log = scale - mats.precision * math.log(2) + 48 * math.log(2)
    for val in values:
        if val != 0 and float(mp.log(val)) < floor_log:
            raise NumericError(
                "certificate difference is below the working-precision floor; "
                "increase precision")


# ---------------------------------------------------------------------------
# candidate directions


def bounded_candidate(pot: MeromorphicPotential, E, theta, alpha, q: int,
                      n_grid: int = 720) -> tuple[tuple[float, float], float]:
    """Unit initial vector whose orbit stays smallest over [-q-1, 2q].

    Works in float64 with a separate log scale; returns (v, C) where C bounds
    ||(phi_k, phi_{k-1})|| over the window for the returned direction.
    """
    alpha_f = float(as_mpf(alpha))
    theta_f = float(as_mpf(theta)) % 1.0
    mats = []  # (logscale, 2x2) mapping v -> (phi_k, phi_{k-1})
    m = np.eye(2)
    ls = 0.0
    for k in range(0, 2 * q):
        V = float(pot.V_array(np.array([(theta_f + k * alpha_f) % 1.0]), cap=1e250)[0])
        m = np.array([[E - V, -1.0], [1.0, 0.0]]) @ m
        s = np.max(np.abs(m))
        if s > 1e100 or s < 1e-100:
            ls += math.log(s)
            m = m / s
        mats.append((ls, m.copy()))
    m = np.eye(2)
    ls = 0.0
    for k in range(-1, -q - 2, -1):
        V = float(pot.V_array(np.array([(theta_f + k * alpha_f) % 1.0]), cap=1e250)[0])
        m = np.array([[0.0, 1.0], [-1.0, E - V]]) @ m  # inverse step
        s = np.max(np.abs(m))
        if s > 1e100 or s < 1e-100:
            ls += math.log(s)
            m = m / s
        mats.append((ls, m.copy()))
    psis = np.pi * np.arange(n_grid) / n_grid
    vs = np.stack([np.cos(psis), np.sin(psis)])  # (2, n_grid)
    worst = np.full(n_grid, -np.inf)
    for ls, mk in mats:
        w = mk @ vs
        nn = np.sqrt(w[0] ** 2 + w[1] ** 2)
        worst = np.maximum(worst, ls + np.log(np.maximum(nn, 1e-300)))
    i = int(np.argmin(worst))

    def cost(psi: float) -> float:
        v = np.array([math.cos(psi), math.sin(psi)])
        c = -np.inf
        for ls, mk in mats:
            w = mk @ v
            c = max(c, ls + math.log(max(math.hypot(w[0], w[1]), 1e-300)))
        return c

    lo = psis[i] - np.pi / n_grid
    hi = psis[i] + np.pi / n_grid
    for _ in range(40):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if cost(m1) <= cost(m2):
            hi = m2
        else:
            lo = m1
    psi = (lo + hi) / 2
    v = (math.cos(psi), math.sin(psi))
    return v, math.exp(cost(psi))


def contracted_direction(pot: MeromorphicPotential, E, theta, alpha,
                         q: int, iters: int = 5) -> tuple[float, float]:
    """Initial direction of the near-kernel vector of the window truncation,
    found by inverse-power iteration on the tridiagonal restriction to
    [-q-1, 2q] (Dirichlet ends)."""
    from scipy.linalg import solve_banded

    alpha_f = float(as_mpf(alpha))
    theta_f = float(as_mpf(theta)) % 1.0
    k_lo, k_hi = -q - 1, 2 * q
    ks = np.arange(k_lo, k_hi + 1, dtype=float)
    diag = pot.V_array(np.mod(theta_f + ks * alpha_f, 1.0), cap=1e12) - float(E)
    N = diag.shape[0]
    ab = np.zeros((3, N))
    ab[0, 1:] = 1.0
    ab[1, :] = diag + 1e-10  # tiny shift keeps the solve finite at exact kernels
    ab[2, :-1] = 1.0
    rng_free = np.cos(0.7 + 0.3 * np.arange(N))  # deterministic start
    psi = rng_free / np.linalg.norm(rng_free)
    for _ in range(iters):
        try:
            psi = solve_banded((1, 1), ab, psi)
        except Exception:
            break
        nrm = np.linalg.norm(psi)
        if not np.isfinite(nrm) or nrm == 0:
            break
        psi = psi / nrm
    i0 = -k_lo  # index of site 0
    v = np.array([psi[i0], psi[i0 - 1]])
    nrm = np.linalg.norm(v)
    if not np.isfinite(nrm) or nrm < 1e-12:
        return bounded_candidate(pot, E, theta, alpha, q)[0]
    return (float(v[0] / nrm), float(v[1] / nrm))


# ---------------------------------------------------------------------------
# the max inequality and the trace dichotomy


def max_inequality(seg: SolutionSegment, q: int) -> tuple[float, str]:
    """max of ||(phi_q, phi_{q-1})||, ||(phi_{-q}, phi_{-q-1})||,
    ||(phi_{2q}, phi_{2q-1})||; verdict 'excluded' when >= 1/4 - tol."""
    if seg.k_min > -q - 1 or seg.k_max < 2 * q:
        raise RangeError(f"segment [{seg.k_min}, {seg.k_max}] does not cover "
                         f"[-{q + 1}, {2 * q}]")
    mx = max(seg.vec_norm(q), seg.vec_norm(-q), seg.vec_norm(2 * q))
    verdict = "excluded" if mx >= 0.25 - MAX_NORM_TOL else "inconclusive"
    return mx, verdict


@dataclass(frozen=True)
class TraceReport:
    q: int
    trace: float
    case: str  # "|tr|>1/2" | "|tr|<1/2" | "|tr|=1/2"
    residual_linear: float   # B - tr(B) I + B^{-1}
    residual_square: float   # B^2 - tr(B) B + I


def trace_dichotomy(pot: MeromorphicPotential, E, theta, alpha, q: int,
                    mats: GordonMatrices | None = None) -> TraceReport:
    """Trace of A_q with the two Cayley-Hamilton residuals (relative), which
    are exact identities for unit-determinant matrices."""
    if mats is None:
        mats = gordon_matrices(pot, E, theta, alpha, q)
    with mp.workprec(mats.precision):
        B = mats.A_q
        tr = B.trace()
        Binv = B.inv()
        nrm = B.norm()
        r1 = TransferMatrix2(B.a - tr + Binv.a, B.b + Binv.b,
                             B.c + Binv.c, B.d - tr + Binv.d).norm()
        B2 = B.matmul(B)
        r2 = TransferMatrix2(B2.a - tr * B.a + 1, B2.b - tr * B.b,
                             B2.c - tr * B.c, B2.d - tr * B.d + 1).norm()
        res_lin = float(r1 / max(nrm, mp.mpf(1)))
        res_sq = float(r2 / max(nrm * nrm, mp.mpf(1)))
        trf = float(tr)
    if abs(trf) > 0.5:
        case = "|tr|>1/2"
    elif abs(trf) < 0.5:
        case = "|tr|<1/2"
    else:
        case = "|tr|=1/2"
    return TraceReport(q=q, trace=trf, case=case,
                       residual_linear=res_lin, residual_square=res_sq)


# ---------------------------------------------------------------------------
# the quantitative smallness bound


@dataclass(frozen=True)
class SmallnessCheck:
    """Certificate left-hand sides against the bound e^{q (L - delta_hat + 4 eps)}.

    ``vacuous`` marks configurations where the bound exceeds 1 and nothing is
    being tested.  Logs are reported so tiny values stay comparable.
    """

    q: int
    level: int
    lhs_square_log: float
    lhs_inverse_log: float
    bound_log: float
    vacuous: bool
    passed: bool | None
    candidate: tuple[float, float]
    candidate_bound: float
    empirical_rate: float


def smallness_check(pot: MeromorphicPotential, E, theta, alpha,
                  cf: ContinuedFraction, n_i: int, epsilon: float,
                  L: float, delta_iv: IndexValue,
                  v=None, mats: GordonMatrices | None = None) -> SmallnessCheck:
    """Evaluate the smallness estimates at a qualifying level.

    The candidate initial vector defaults to the direction whose orbit stays
    most bounded over the window, matching the bounded-solution hypothesis.
    """
    if n_i not in qualifying_levels(delta_iv, epsilon):
        raise SubsequenceError(
            f"level {n_i} not in the qualifying subsequence for eps={epsilon}")
    q = cf.q[n_i]
    bound_log = q * (L - delta_iv.value + 4 * epsilon)
    if v is None:
        v, cbound = bounded_candidate(pot, E, theta, alpha, q)
    else:
        cbound = math.nan
    lhs = gordon_lhs(pot, E, theta, alpha, q, v=v, mats=mats)
    vacuous = bound_log >= 0
    lsq = lhs.square_log
    linv = lhs.inverse_log
    passed = None if vacuous else (lsq <= bound_log and linv <= bound_log)
    rate = -max(lsq, linv) / q
    return SmallnessCheck(q=q, level=n_i, lhs_square_log=lsq, lhs_inverse_log=linv,
                       bound_log=float(bound_log), vacuous=vacuous, passed=passed,
                       candidate=(float(v[0]), float(v[1])),
                       candidate_bound=float(cbound), empirical_rate=rate)


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class GordonCertificate:
    """Per-level exclusion record, aggregated over the direction grid.

    lhs values are worst-case (max) over directions, max_norm is the minimum
    over directions of the three-norm maximum, so the verdict quantifies over
    every tested initial vector.
    """

    E: float
    q: int
    level: int
    lhs_square_log: float
    lhs_inverse_log: float
    trace: float
    max_norm: float
    empirical_rate: float
    verdict: str  # "excluded" | "inconclusive"
    directions_tested: int

    def to_json_dict(self) -> dict:
        return {"E": self.E, "q": self.q, "level": self.level,
                "lhs_square_log": self.lhs_square_log,
                "lhs_inverse_log": self.lhs_inverse_log,
                "trace": self.trace, "max_norm": self.max_norm,
                "empirical_rate": self.empirical_rate, "verdict": self.verdict,
                "directions_tested": self.directions_tested}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _direction_grid(n_directions: int) -> list[tuple[float, float]]:
    return [(math.cos(math.pi * i / n_directions),
             math.sin(math.pi * i / n_directions)) for i in range(n_directions)]


def exclusion_certificate(pot: MeromorphicPotential, E, theta, alpha,
                          cf: ContinuedFraction, levels, c: float,
                          n_directions: int = 360) -> list[GordonCertificate]:
    """One certificate per requested level.

    A direction is excluded at a level when both left-hand sides are
    <= e^{-c q} and the generated solution's three-norm maximum is
    >= 1/4 - tol; the level verdict requires this for every tested direction
    (a uniform grid plus the window-contracted direction).
    """
    if not levels:
        raise InvalidInputError("levels must be nonempty")
    for n_i in levels:
        if not 1 <= n_i <= cf.depth:
            raise RangeError(f"level {n_i} exceeds stored depth {cf.depth}")
    certs = []
    for n_i in levels:
        q = cf.q[n_i]
        mats = gordon_matrices(pot, E, theta, alpha, q)
        dirs = _direction_grid(n_directions)
        dirs.append(contracted_direction(pot, E, theta, alpha, q))
        dirs.append(bounded_candidate(pot, E, theta, alpha, q)[0])
        thr_log = -c * q
        worst_sq = -math.inf
        worst_inv = -math.inf
        min_maxn = math.inf
        all_excluded = True
        with mp.workprec(mats.precision):
            for v in dirs:
                lhs = gordon_lhs(pot, E, theta, alpha, q, v=v, mats=mats)
                vv = (as_mpf(v[0]), as_mpf(v[1]))
                nrm = _vec_norm(vv)
                vv = (vv[0] / nrm, vv[1] / nrm)
                n_fwd = float(_vec_norm(mats.A_q.apply(vv)))
                n_bwd = float(_vec_norm(mats.Ainv_q_shift.apply(vv)))
                n_2q = float(_vec_norm(mats.A_2q.apply(vv)))
                maxn = max(n_fwd, n_bwd, n_2q)
                worst_sq = max(worst_sq, lhs.square_log)
                worst_inv = max(worst_inv, lhs.inverse_log)
                min_maxn = min(min_maxn, maxn)
                small = lhs.square_log <= thr_log and lhs.inverse_log <= thr_log
                if not (small and maxn >= 0.25 - MAX_NORM_TOL):
                    all_excluded = False
            trace = float(mats.A_q.trace())
        worst = max(worst_sq, worst_inv)
        rate = -worst / q
        certs.append(GordonCertificate(
            E=float(E), q=q, level=n_i, lhs_square_log=worst_sq,
            lhs_inverse_log=worst_inv, trace=trace, max_norm=min_maxn,
            empirical_rate=rate,
            verdict="excluded" if all_excluded else "inconclusive",
            directions_tested=len(dirs)))
    return certs
