"""Bivariate parametric copulas: Gaussian, Frank, Clayton and Gumbel.

Every family here is exchangeable, so a single h-function
``h(u | v) = dC(u, v)/dv`` serves both conditioning directions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate, optimize, special, stats

EPS = 1e-10

GAUSSIAN = "gaussian"
FRANK = "frank"
CLAYTON = "clayton"
GUMBEL = "gumbel"
INDEPENDENCE = "independence"

FAMILIES = (GAUSSIAN, FRANK, CLAYTON, GUMBEL)

BOUNDS = {
    GAUSSIAN: (-0.999, 0.999),
    FRANK: (-35.0, 35.0),
    CLAYTON: (1e-4, 28.0),
    GUMBEL: (1.0, 17.0),
}

INDEPENDENCE_TAU = 0.02


def _clip(u):
    return np.clip(np.asarray(u, dtype=float), EPS, 1.0 - EPS)


# -- Gaussian ---------------------------------------------------------------

def _gauss_logpdf(u, v, rho):
    x, y = special.ndtri(u), special.ndtri(v)
    r2 = 1.0 - rho * rho
    return -0.5 * math.log(r2) - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)


def _gauss_h(u, v, rho):
    x, y = special.ndtri(u), special.ndtri(v)
    return special.ndtr((x - rho * y) / math.sqrt(1.0 - rho * rho))


def _gauss_hinv(w, v, rho):
    x, y = special.ndtri(w), special.ndtri(v)
    return special.ndtr(x * math.sqrt(1.0 - rho * rho) + rho * y)


# -- Frank --------------------------------------------------------------------
# Negative parameters use C_{-t}(u, v) = u - C_t(u, 1 - v), which keeps every
# exponential bounded by one.

def _frank_logpdf(u, v, theta):
    if theta < 0:
        return _frank_logpdf(u, 1.0 - v, -theta)
    a = -np.expm1(-theta)
    denom = a - np.expm1(-theta * u) * np.expm1(-theta * v)
    return math.log(theta * a) - theta * (u + v) - 2.0 * np.log(np.abs(denom))


def _frank_h(u, v, theta):
    if theta < 0:
        return _frank_h(u, 1.0 - v, -theta)
    eu, ev = np.expm1(-theta * u), np.expm1(-theta * v)
    return np.exp(-theta * v) * eu / (np.expm1(-theta) + eu * ev)


def _frank_hinv(w, v, theta):
    if theta < 0:
        return _frank_hinv(w, 1.0 - v, -theta)
    ev = np.expm1(-theta * v)
    b = np.exp(-theta * v)
    return -np.log1p(w * np.expm1(-theta) / (b - w * ev)) / theta


def _debye1(theta: float) -> float:
    if theta == 0:
        return 1.0
    val, _ = integrate.quad(lambda t: t / math.expm1(t) if t != 0 else 1.0, 0.0, theta)
    return val / theta


def frank_tau(theta: float) -> float:
    if abs(theta) < 1e-8:
        return 0.0
    if theta < 0:
        return -frank_tau(-theta)
    return 1.0 - 4.0 / theta * (1.0 - _debye1(theta))


# -- Clayton ----------------------------------------------------------------

def _clayton_logs(u, v, theta):
    # log(u^-t + v^-t - 1), evaluated in log space to avoid overflow
    la, lb = -theta * np.log(u), -theta * np.log(v)
    lsum = np.logaddexp(la, lb)
    return lsum + np.log1p(-np.exp(-lsum))


def _clayton_logpdf(u, v, theta):
    ls = _clayton_logs(u, v, theta)
    return math.log1p(theta) - (1.0 + theta) * (np.log(u) + np.log(v)) - (2.0 + 1.0 / theta) * ls


def _clayton_h(u, v, theta):
    ls = _clayton_logs(u, v, theta)
    return np.exp(-(theta + 1.0) * np.log(v) - (1.0 + 1.0 / theta) * ls)


def _clayton_hinv(w, v, theta):
    lv = np.log(v)
    inner = np.exp(-theta * lv) * np.expm1(-theta / (1.0 + theta) * np.log(w)) + 1.0
    return np.exp(-np.log(inner) / theta)


# -- Gumbel -----------------------------------------------------------------

def _gumbel_parts(u, v, theta):
    x, y = -np.log(u), -np.log(v)
    ls = np.logaddexp(theta * np.log(x), theta * np.log(y))
    a = np.exp(ls / theta)
    return x, y, ls, a


def _gumbel_logpdf(u, v, theta):
    x, y, ls, a = _gumbel_parts(u, v, theta)
    return (
        -a + x + y
        + (theta - 1.0) * (np.log(x) + np.log(y))
        + (1.0 / theta - 2.0) * ls
        + np.log(a + theta - 1.0)
    )


def _gumbel_h(u, v, theta):
    x, y, ls, a = _gumbel_parts(u, v, theta)
    return np.exp(-a + y + (theta - 1.0) * np.log(y) + (1.0 / theta - 1.0) * ls)


def _gumbel_hinv(w, v, theta, iters: int = 60):
    # h(. | v) is increasing in u; bisection on [EPS, 1 - EPS]
    w, v = np.broadcast_arrays(np.asarray(w, dtype=float), np.asarray(v, dtype=float))
    lo = np.full(w.shape, EPS)
    hi = np.full(w.shape, 1.0 - EPS)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = _gumbel_h(mid, v, theta) < w
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


_LOGPDF = {GAUSSIAN: _gauss_logpdf, FRANK: _frank_logpdf, CLAYTON: _clayton_logpdf, GUMBEL: _gumbel_logpdf}
_H = {GAUSSIAN: _gauss_h, FRANK: _frank_h, CLAYTON: _clayton_h, GUMBEL: _gumbel_h}
_HINV = {GAUSSIAN: _gauss_hinv, FRANK: _frank_hinv, CLAYTON: _clayton_hinv, GUMBEL: _gumbel_hinv}


def family_tau(family: str, theta: float) -> float:
    """Kendall's tau implied by a family parameter."""
    if family == GAUSSIAN:
        return 2.0 / math.pi * math.asin(theta)
    if family == FRANK:
        return frank_tau(theta)
    if family == CLAYTON:
        return theta / (theta + 2.0)
    if family == GUMBEL:
        return 1.0 - 1.0 / theta
    return 0.0


def tau_to_theta(family: str, tau: float) -> float:
    """Invert Kendall's tau to a starting parameter, clipped to the family bounds."""
    lo, hi = BOUNDS[family]
    if family == GAUSSIAN:
        theta = math.sin(math.pi * tau / 2.0)
    elif family == CLAYTON:
        theta = 2.0 * tau / (1.0 - tau) if tau < 1 else hi
    elif family == GUMBEL:
        theta = 1.0 / (1.0 - tau) if tau < 1 else hi
    else:
        target = min(max(tau, frank_tau(lo) + 1e-9), frank_tau(hi) - 1e-9)
        if abs(target) < 1e-9:
            return 0.0
        theta = optimize.brentq(lambda t: frank_tau(t) - target, lo, hi)
    return float(min(max(theta, lo), hi))


@dataclass(frozen=True)
class PairCopula:
    family: str = INDEPENDENCE
    theta: float = 0.0
    loglik: float = 0.0
    near_bound: bool = False

    @property
    def is_independence(self) -> bool:
        return self.family == INDEPENDENCE

    @property
    def tau(self) -> float:
        return 0.0 if self.is_independence else family_tau(self.family, self.theta)

    def logpdf(self, u, v) -> np.ndarray:
        u, v = _clip(u), _clip(v)
        if self.is_independence:
            return np.zeros(np.broadcast(u, v).shape)
        return _LOGPDF[self.family](u, v, self.theta)

    def pdf(self, u, v) -> np.ndarray:
        return np.exp(self.logpdf(u, v))

    def hfunc(self, u, v) -> np.ndarray:
        """Conditional CDF ``P(U <= u | V = v)``."""
        u, v = _clip(u), _clip(v)
        if self.is_independence:
            return np.broadcast_to(u, np.broadcast(u, v).shape).copy()
        return _clip(_H[self.family](u, v, self.theta))

    def hinv(self, w, v) -> np.ndarray:
        """Inverse of :meth:`hfunc` in its first argument."""
        w, v = _clip(w), _clip(v)
        if self.is_independence:
            return np.broadcast_to(w, np.broadcast(w, v).shape).copy()
        return _clip(_HINV[self.family](w, v, self.theta))

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "theta": self.theta,
            "loglik": self.loglik,
            "near_bound": self.near_bound,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PairCopula":
        return cls(d["family"], float(d["theta"]), float(d["loglik"]), bool(d.get("near_bound", False)))


def _fit_family(family: str, u: np.ndarray, v: np.ndarray, tau: float) -> PairCopula:
    lo, hi = BOUNDS[family]
    if family == FRANK:
        # keep the search on the side of zero matching the sign of tau
        lo, hi = (1e-4, hi) if tau > 0 else (lo, -1e-4)
    logpdf = _LOGPDF[family]

    def nll(theta):
        val = -float(np.sum(logpdf(u, v, theta)))
        return val if math.isfinite(val) else 1e300

    start = min(max(tau_to_theta(family, tau), lo), hi)
    res = optimize.minimize_scalar(nll, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    theta = float(res.x)
    if nll(start) < nll(theta):
        theta = start
    best = nll(theta)
    for edge in (lo, hi):
        if nll(edge) < best:
            theta, best = edge, nll(edge)
    if best >= 1e300:
        raise FloatingPointError(f"{family}: log-likelihood not finite")
    span = hi - lo
    near = theta >= hi - 1e-3 * span or (family in (GAUSSIAN, FRANK) and theta <= lo + 1e-3 * span)
    return PairCopula(family, theta, -best, near)


def fit_pair_copula(u, v, families: Sequence[str] = FAMILIES) -> PairCopula:
    """Select the maximum-likelihood family and parameter for ``(u, v)``.

    Parameters are fitted by bounded 1-D search, seeded with Kendall's tau
    inversion. Negative dependence excludes Clayton and Gumbel;
    ``|tau| < 0.02`` returns the independence copula.
    """
    u, v = _clip(u).ravel(), _clip(v).ravel()
    if u.shape != v.shape:
        raise ValueError("u and v must have equal length")
    if u.size < 10:
        raise ValueError(f"need at least 10 observations, got {u.size}")
    tau = float(stats.kendalltau(u, v).statistic)
    if not math.isfinite(tau) or abs(tau) < INDEPENDENCE_TAU:
        return PairCopula()
    candidates = [f for f in families if not (tau < 0 and f in (CLAYTON, GUMBEL))]
    best = PairCopula()
    fitted = 0
    for family in candidates:
        try:
            cop = _fit_family(family, u, v, tau)
        except (FloatingPointError, ValueError, ArithmeticError) as exc:
            warnings.warn(f"skipping {family} copula: {exc}")
            continue
        fitted += 1
        if cop.loglik > best.loglik:
            best = cop
    if fitted == 0:
        warnings.warn("every copula family failed; using independence")
    return best
