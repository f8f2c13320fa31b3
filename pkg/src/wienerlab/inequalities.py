"""Statistical verification of functional inequalities under the Gaussian law.

Every check produces an InequalityReport with a uniform decision rule: the
inequality is *saturated* when |rhs - lhs| <= 4 combined standard errors,
*pass* when the slack is positive beyond that margin, *fail* otherwise.
Closed-form sides carry zero standard error.  Exponential moments are
accumulated in log space to avoid overflow.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import factorial, inf, pi, sqrt

import numpy as np

from .chaos import ChaosExpansion, HValuedExpansion
from .gaussian import SamplePool
from .measure import WickExponential

SE_FACTOR = 4.0


class EstimatorOverflowError(FloatingPointError):
    """An exponential-moment estimate too large to represent."""


class NonpositiveSampleError(ValueError):
    """A positivity-constrained functional went nonpositive on the pool."""


@dataclass
class InequalityReport:
    """Outcome of one inequality check: lhs <= rhs up to statistical noise."""

    name: str
    lhs: float
    rhs: float
    lhs_se: float
    rhs_se: float
    verdict: str

    @property
    def slack(self):
        return self.rhs - self.lhs

    @property
    def combined_se(self):
        return sqrt(self.lhs_se ** 2 + self.rhs_se ** 2)

    def to_json(self):
        return json.dumps({
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "lhs_se": self.lhs_se,
            "rhs_se": self.rhs_se,
            "verdict": self.verdict,
        })


def _verdict(lhs, rhs, lhs_se, rhs_se):
    slack = rhs - lhs
    margin = SE_FACTOR * sqrt(lhs_se ** 2 + rhs_se ** 2)
    if abs(slack) <= margin:
        return "saturated"
    return "pass" if slack > 0 else "fail"


def make_report(name, lhs, rhs, lhs_se=0.0, rhs_se=0.0) -> InequalityReport:
    return InequalityReport(
        name=name, lhs=float(lhs), rhs=float(rhs),
        lhs_se=float(lhs_se), rhs_se=float(rhs_se),
        verdict=_verdict(lhs, rhs, lhs_se, rhs_se),
    )


def exp_mean(values) -> tuple[float, float]:
    """(mean, standard error) of exp(values), accumulated at shifted scale.

    Raises EstimatorOverflowError when the mean itself exceeds float range.
    """
    values = np.asarray(values, dtype=np.float64)
    m = float(values.max())
    scaled = np.exp(values - m)
    log_mean = m + np.log(scaled.mean())
    if log_mean > 700.0:
        raise EstimatorOverflowError(
            f"exponential moment around exp({log_mean:.1f}) overflows"
        )
    mean = float(np.exp(log_mean))
    se = float(np.exp(m) * scaled.std(ddof=1) / sqrt(len(values)))
    return mean, se


def _mean_se(values):
    values = np.asarray(values, dtype=np.float64)
    return float(values.mean()), float(values.std(ddof=1) / sqrt(len(values)))


def _power_norm(values, p):
    """(||v||_p, se) from samples, by the delta method on mean |v|^p."""
    powered = np.abs(np.asarray(values, dtype=np.float64)) ** p
    m, se_m = _mean_se(powered)
    if m == 0.0:
        return 0.0, 0.0
    norm = m ** (1.0 / p)
    return norm, norm / (p * m) * se_m


def _gradient_sq(F, samples):
    if isinstance(F, WickExponential):
        g = F.gradient_batch(samples)
    else:
        g = F.derivative().evaluate_batch(samples)
    return np.sum(g * g, axis=1)


# -- the checks ------------------------------------------------------------------


def check_poincare(F: ChaosExpansion, pool: SamplePool | None = None,
                   method: str = "exact") -> InequalityReport:
    """Var F <= E[|grad F|^2].

    Both sides are exact in the coefficients (sum n! ||f_n||^2 versus
    sum n n! ||f_n||^2); ``method='mc'`` estimates them on the pool instead
    for a cross-check.
    """
    if method == "exact":
        lhs = sum(factorial(n) * k.norm_sq() for n, k in F.terms.items() if n > 0)
        rhs = sum(n * factorial(n) * k.norm_sq() for n, k in F.terms.items() if n > 0)
        return make_report("poincare", lhs, rhs)
    if pool is None:
        raise ValueError("Monte Carlo method needs a pool")
    vals = F.evaluate_batch(pool.samples)
    centered_sq = (vals - vals.mean()) ** 2
    lhs, lhs_se = _mean_se(centered_sq)
    rhs, rhs_se = _mean_se(_gradient_sq(F, pool.samples))
    return make_report("poincare_mc", lhs, rhs, lhs_se, rhs_se)


def check_log_sobolev(f, grad, pool: SamplePool) -> InequalityReport:
    """E[f^2 log f^2] - E[f^2] log E[f^2] <= 2 E[|grad f|^2].

    ``f`` maps samples to positive values; ``grad`` maps samples to (M, d)
    gradients (an HValuedExpansion is also accepted).
    """
    x = pool.samples
    vals = np.asarray(f(x), dtype=np.float64)
    bad = np.flatnonzero(vals <= 0.0)
    if len(bad):
        raise NonpositiveSampleError(
            f"functional is nonpositive at pool row {bad[0]}"
        )
    sq = vals * vals
    ent = sq * np.log(sq)
    a_mean = sq.mean()
    lhs = float(ent.mean() - a_mean * np.log(a_mean))
    influence = (ent - ent.mean()) - (np.log(a_mean) + 1.0) * (sq - a_mean)
    lhs_se = float(influence.std(ddof=1) / sqrt(len(sq)))
    if isinstance(grad, HValuedExpansion):
        g = grad.evaluate_batch(x)
    else:
        g = np.asarray(grad(x), dtype=np.float64)
    rhs, rhs_se = _mean_se(2.0 * np.sum(g * g, axis=1))
    return make_report("log_sobolev", lhs, rhs, lhs_se, rhs_se * 1.0)


def check_hypercontractivity(F, p: float, q: float, t: float,
                             pool: SamplePool) -> InequalityReport:
    """||P_t F||_q <= ||F||_p, expected to hold iff q - 1 <= e^{2t}(p - 1).

    ``F`` is a ChaosExpansion (spectral semigroup action) or a
    WickExponential (exact semigroup action on the exponent).
    """
    if p <= 1 or q <= 1:
        raise ValueError("exponents must exceed 1")
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    smoothed = F.ou(t) if isinstance(F, WickExponential) else F.ou_semigroup(t)
    lhs, lhs_se = _power_norm(smoothed.evaluate_batch(pool.samples), q)
    rhs, rhs_se = _power_norm(F.evaluate_batch(pool.samples), p)
    return make_report("hypercontractivity", lhs, rhs, lhs_se, rhs_se)


def check_tail_bound(F, sigma: float, c: float, pool: SamplePool,
                     mean: float | None = None) -> InequalityReport:
    """mu{|F| > c} <= 2 exp(-(c - E[F])^2 / (2 sigma^2)).

    ``sigma`` is the caller-certified essential bound on |grad F|_H; the
    expectation is exact for chaos functionals and estimated otherwise.
    """
    if sigma <= 0:
        raise ValueError("a positive gradient certificate is required")
    vals = np.asarray(F(pool.samples) if callable(F) else F.evaluate_batch(pool.samples),
                      dtype=np.float64)
    if mean is None:
        mean = F.expectation() if isinstance(F, ChaosExpansion) else float(vals.mean())
    hits = np.abs(vals) > c
    p_hat = float(hits.mean())
    lhs_se = sqrt(max(p_hat * (1.0 - p_hat), 1.0 / len(vals)) / len(vals))
    rhs = 2.0 * np.exp(-((c - mean) ** 2) / (2.0 * sigma ** 2))
    return make_report(f"tail_bound_c={c:g}", p_hat, rhs, lhs_se, 0.0)


def fernique_moment(F, sigma: float, pool: SamplePool,
                    fraction: float = 0.5) -> tuple[float, float, float]:
    """Sample check that E[exp(lambda F^2)] is finite for lambda < 1/(2 sigma^2).

    Returns (lambda, estimate, standard error) at lambda = fraction/(2 sigma^2).
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    lam = fraction / (2.0 * sigma ** 2)
    vals = np.asarray(F(pool.samples) if callable(F) else F.evaluate_batch(pool.samples),
                      dtype=np.float64)
    est, se = exp_mean(lam * vals * vals)
    return lam, est, se


def check_coupling(F: ChaosExpansion, pool: SamplePool,
                   mode: str = "exp") -> InequalityReport:
    """Coupling inequalities on centered functionals.

    mode='exp':  E[exp(F - E F)] <= E[exp(pi^2/8 |grad F|^2)]
    mode='abs':  E[|F - E F|]    <= (pi/2) E[|grad F|]
    """
    x = pool.samples
    vals = F.evaluate_batch(x) - F.expectation()
    grad_sq = _gradient_sq(F, x)
    if mode == "exp":
        lhs, lhs_se = exp_mean(vals)
        rhs, rhs_se = exp_mean((pi ** 2 / 8.0) * grad_sq)
        name = "coupling_exp"
    elif mode == "abs":
        lhs, lhs_se = _mean_se(np.abs(vals))
        rhs_vals = (pi / 2.0) * np.sqrt(grad_sq)
        rhs, rhs_se = _mean_se(rhs_vals)
        name = "coupling_abs"
    else:
        raise ValueError("mode must be 'exp' or 'abs'")
    return make_report(name, lhs, rhs, lhs_se, rhs_se)


@dataclass
class MeyerSpotcheck:
    """Range of ||grad F||_p / ||(I+L)^{1/2} F||_p over a functional family."""

    ratios: list
    band: tuple
    in_band: bool


def _sqrt_one_plus_number(F: ChaosExpansion) -> ChaosExpansion:
    return ChaosExpansion(
        F.dim, {n: k.scaled(sqrt(1.0 + n)) for n, k in F.terms.items()}
    )


def meyer_ratio_spotcheck(family, p: float, pool: SamplePool,
                          band=(0.1, 10.0)) -> MeyerSpotcheck:
    """Sanity probe of the first-order norm equivalence at a fixed exponent.

    At p = 2 the ratio is computed exactly from coefficients; otherwise by
    Monte Carlo.  Constant members have ratio 0 and are excluded from the
    band verdict.
    """
    family = list(family)
    if not family:
        raise ValueError("empty family")
    ratios = []
    for F in family:
        if p == 2:
            num_sq = sum(n * factorial(n) * k.norm_sq() for n, k in F.terms.items())
            den_sq = sum((1 + n) * factorial(n) * k.norm_sq()
                         for n, k in F.terms.items())
            ratio = sqrt(num_sq / den_sq) if den_sq > 0 else 0.0
        else:
            grad_norm = np.sqrt(_gradient_sq(F, pool.samples))
            num, _ = _power_norm(grad_norm, p)
            den, _ = _power_norm(
                _sqrt_one_plus_number(F).evaluate_batch(pool.samples), p
            )
            ratio = num / den if den > 0 else (0.0 if num == 0.0 else inf)
        ratios.append(float(ratio))
    nonconstant = [r for r in ratios if r > 0.0]
    in_band = all(band[0] <= r <= band[1] for r in nonconstant)
    return MeyerSpotcheck(ratios=ratios, band=tuple(band), in_band=in_band)
