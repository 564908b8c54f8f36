"""Meromorphic sampling potentials V = g/f on the torus.

f is normalised as the product over poles of 2 sin(pi (x - theta_l)) times a
fixed sign, so that |f(x)| = prod_l |e^{2 pi i x} - e^{2 pi i theta_l}| and
the mean of ln|f| over the torus vanishes.  Built-in families: the cosine
model (no poles) and the tangent model (single pole at 1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath as mp
import numpy as np

from .arithmetic import (
    ContinuedFraction,
    IndexValue,
    as_mpf,
    delta_index,
    qualifying_levels,
    torus_norm,
)
from .errors import (
    DegenerateModelError,
    InvalidInputError,
    PoleProximityError,
    SubsequenceError,
)

__all__ = [
    "MeromorphicPotential",
    "make_amo",
    "make_maryland",
    "make_custom",
    "eval_V",
    "f_product_check",
    "G_REGISTRY",
]


def _is_array(x) -> bool:
    return isinstance(x, np.ndarray)


def _sinpi(x):
    return np.sin(np.pi * x) if _is_array(x) else mp.sinpi(x)


def _cospi(x):
    return np.cos(np.pi * x) if _is_array(x) else mp.cospi(x)


@dataclass(frozen=True)
class MeromorphicPotential:
    """V = g/f with poles listed with multiplicity (repeats).

    ``g`` must accept both scalars (mpf) and numpy arrays; its Lipschitz
    constant is declared, not verified.  ``f_sign`` fixes the overall sign of
    the normalised f.
    """

    poles: tuple
    g: Callable
    g_lipschitz: float
    label: str
    coupling: float = 1.0
    f_sign: int = 1
    eps_floor: float = 1e-12

    @property
    def m(self) -> int:
        return len(self.poles)

    def f(self, x):
        """Signed normalised f; |f| is the product of chord lengths."""
        if _is_array(x):
            out = np.full_like(x, float(self.f_sign), dtype=float)
            for pl in self.poles:
                out = out * (2.0 * np.sin(np.pi * (x - float(pl))))
            return out
        acc = mp.mpf(self.f_sign)
        for pl in self.poles:
            acc *= 2 * mp.sinpi(as_mpf(x) - as_mpf(pl))
        return acc

    def pole_distance(self, x):
        """Torus distance from x to the nearest pole; +inf when pole-free."""
        if not self.poles:
            return math.inf if not _is_array(x) else np.full_like(x, np.inf, dtype=float)
        if _is_array(x):
            d = np.full_like(x, np.inf, dtype=float)
            for pl in self.poles:
                r = np.mod(x - float(pl), 1.0)
                d = np.minimum(d, np.minimum(r, 1.0 - r))
            return d
        return min(torus_norm(as_mpf(x) - as_mpf(pl)) for pl in self.poles)

    def V_array(self, x: np.ndarray, cap: float | None = None) -> np.ndarray:
        """Vectorised V for the float engines; optionally magnitude-capped."""
        if self.m == 0:
            v = np.asarray(self.g(x), dtype=float)
        else:
            fv = self.f(x)
            fv = np.where(np.abs(fv) < 1e-300, np.copysign(1e-300, fv + 1e-300), fv)
            v = np.asarray(self.g(x), dtype=float) / fv
        if cap is not None:
            v = np.clip(v, -cap, cap)
        return v

    def log_f_integral(self, dps: int = 30) -> float:
        """Quadrature of ln|f| over one period, split at the poles.

        Vanishes identically for the normalised f; returned for checking.
        """
        if self.m == 0:
            return 0.0
        with mp.workdps(dps):
            pts = sorted({mp.mpf(0), mp.mpf(1), *(as_mpf(pl) for pl in self.poles)})
            val = mp.quad(lambda t: mp.log(abs(self.f(t))), pts)
            return float(val)


# ---------------------------------------------------------------------------
# built-in families and the custom registry


def make_amo(lam: float) -> MeromorphicPotential:
    """Cosine model: no poles, V(x) = lam * cos 2 pi x."""
    lam = float(lam)

    def g(x):
        if _is_array(x):
            return lam * np.cos(2 * np.pi * x)
        return lam * mp.cospi(2 * as_mpf(x))

    return MeromorphicPotential(poles=(), g=g, g_lipschitz=2 * math.pi * abs(lam),
                                label="amo", coupling=lam)


def make_maryland(lam: float) -> MeromorphicPotential:
    """Tangent model: single pole at 1/2, V(x) = lam * tan pi x.

    Factored as g(x) = 2 lam sin pi x (positive at x = 1/4 for lam > 0) over
    f(x) = 2 cos pi x, whose |f| matches the normalised single-pole product.
    """
    lam = float(lam)
    if lam == 0:
        raise DegenerateModelError("tangent model needs a nonzero coupling")

    def g(x):
        return 2 * lam * _sinpi(x)

    return MeromorphicPotential(poles=(Fraction(1, 2),), g=g,
                                g_lipschitz=2 * math.pi * abs(lam),
                                label="maryland", coupling=lam, f_sign=-1)


def _g_const(c):
    def g(x):
        if _is_array(x):
            return np.full_like(x, float(c), dtype=float)
        return mp.mpf(c)
    return g


G_REGISTRY: dict[str, Callable[[float], Callable]] = {
    "cos2pi": lambda lam: (lambda x: lam * (np.cos(2 * np.pi * x) if _is_array(x)
                                            else mp.cospi(2 * as_mpf(x)))),
    "sin2pi": lambda lam: (lambda x: lam * (np.sin(2 * np.pi * x) if _is_array(x)
                                            else mp.sinpi(2 * as_mpf(x)))),
    "sinpi": lambda lam: (lambda x: lam * _sinpi(x)),
    "const": _g_const,
}


def make_custom(poles: Sequence, g_name: str, coupling: float = 1.0,
                g_lipschitz: float | None = None,
                g: Callable | None = None, label: str = "custom",
                f_sign: int = 1) -> MeromorphicPotential:
    """Custom potential from a pole list and a registered (or supplied) g.

    Poles may repeat to encode multiplicity.  A supplied callable must handle
    scalars and numpy arrays and must declare its Lipschitz constant.
    """
    if g is None:
        if g_name not in G_REGISTRY:
            raise InvalidInputError(
                f"unknown g {g_name!r}; registry: {sorted(G_REGISTRY)}")
        g = G_REGISTRY[g_name](coupling)
        if g_lipschitz is None:
            g_lipschitz = 2 * math.pi * abs(coupling)
    elif g_lipschitz is None:
        raise InvalidInputError("a user-supplied g needs a declared Lipschitz constant")
    pot = MeromorphicPotential(poles=tuple(poles), g=g, g_lipschitz=float(g_lipschitz),
                               label=label, coupling=float(coupling), f_sign=f_sign)
    _check_no_spurious_pole(pot)
    return pot


def _check_no_spurious_pole(pot: MeromorphicPotential):
    for pl in pot.poles:
        gv = pot.g(as_mpf(pl))
        if abs(gv) < 1e-12:
            raise InvalidInputError(
                f"g vanishes at declared pole {pl}: the pole is spurious")


# ---------------------------------------------------------------------------
# evaluation and the orbit-product lower bound


def eval_V(pot: MeromorphicPotential, x):
    """V(x) = g(x)/f(x); raises with the distance when within the pole floor."""
    xv = as_mpf(x)
    if pot.m:
        dist = pot.pole_distance(xv)
        if dist == 0:
            raise PoleProximityError("exact pole hit", dist=0.0)
        if dist <= pot.eps_floor:
            raise PoleProximityError(
                f"within {pot.eps_floor:g} of a pole (dist {float(dist):.3g})",
                dist=float(dist))
        return pot.g(xv) / pot.f(xv)
    return pot.g(xv)


def f_product_check(pot: MeromorphicPotential, theta, cf: ContinuedFraction,
                    n_i: int, epsilon: float,
                    delta_iv: IndexValue | None = None) -> tuple[float, float]:
    """Log of both sides of the orbit-product lower bound

        prod_{j<q_n} |f(theta + j alpha)|  >=  e^{q_n (delta_hat - eps)} / q_{n+1}

    at a qualifying level n_i.  Returns (lhs_log, bound_log); the caller
    asserts lhs_log >= bound_log.  Pole-free potentials return trivially.
    """
    if delta_iv is None:
        delta_iv = delta_index(cf, theta, pot.poles)
    if n_i not in qualifying_levels(delta_iv, epsilon):
        raise SubsequenceError(
            f"level {n_i} not in the qualifying subsequence for eps={epsilon}")
    qn = cf.q[n_i]
    bound_log = float(qn * (delta_iv.value - epsilon) - math.log(cf.q[n_i + 1]))
    if pot.m == 0:
        return 0.0, bound_log
    with mp.workprec(cf.precision):
        alpha = cf.value
        x = as_mpf(theta)
        x -= mp.floor(x)
        acc = mp.mpf(0)
        for _ in range(qn):
            acc += mp.log(abs(pot.f(x)))
            x += alpha
            if x >= 1:
                x -= 1
        return float(acc), bound_log
