"""Ito integration, exponential weights and anticipative densities.

Everything lives on the N-slot grid: an adapted integrand is a per-slot
coefficient using only earlier coordinates, Girsanov weights discretize
exp(-int u dW - 1/2 int u^2 dt) slotwise, and the anticipative density
|det2(I + grad u)| exp(-delta u - |u|^2/2) is evaluated with the matrix
divergence delta u(x) = <u(x), x> - trace(grad u(x)).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import exp, factorial, sqrt

import numpy as np

from .chaos import ChaosExpansion, HValuedExpansion, SymmetricKernel
from .gaussian import CameronMartinVector, DimensionMismatchError, Path, SamplePool


class AdaptednessError(ValueError):
    """A process whose slot coefficients peek at their own or later slots."""


class RamerHypothesisError(ValueError):
    """Shift without a certified contraction bound below one."""


class AdaptedStepProcess:
    """Per-slot coefficients a_j; slot j may use only coordinates < j.

    Coefficients are either chaos expansions (adaptedness is then verified
    structurally) or callables ``fn(j, samples) -> (M,)`` that are trusted to
    read only the first j columns.
    """

    def __init__(self, entries, verified):
        self.entries = list(entries)
        self.n_slots = len(self.entries)
        self.verified = verified

    @classmethod
    def from_chaos(cls, components):
        components = list(components)
        d = len(components)
        for j, comp in enumerate(components):
            if comp.dim != d:
                raise DimensionMismatchError("slot expansion dim differs from slot count")
            for n, kern in comp.terms.items():
                if n == 0:
                    continue
                for idx in kern.coeffs:
                    if idx[-1] >= j:
                        raise AdaptednessError(
                            f"slot {j} coefficient uses direction {idx[-1]}"
                        )
        return cls(components, verified=True)

    @classmethod
    def constant(cls, density):
        """Deterministic integrand from per-slot values of u(t)."""
        density = np.asarray(density, dtype=np.float64)
        d = len(density)
        return cls.from_chaos(
            [ChaosExpansion.constant(v, d) for v in density]
        )

    @classmethod
    def from_function(cls, n_slots, fn):
        return cls([(lambda j: (lambda X, j=j: fn(j, X)))(j) for j in range(n_slots)],
                   verified=False)

    def values_batch(self, samples) -> np.ndarray:
        samples = np.asarray(samples, dtype=np.float64)
        if samples.shape[1] != self.n_slots:
            raise DimensionMismatchError(
                f"samples have {samples.shape[1]} columns, process {self.n_slots} slots"
            )
        out = np.empty((samples.shape[0], self.n_slots))
        for j, entry in enumerate(self.entries):
            if isinstance(entry, ChaosExpansion):
                out[:, j] = entry.evaluate_batch(samples)
            else:
                out[:, j] = np.asarray(entry(samples), dtype=np.float64)
        return out


def ito_integral_batch(process: AdaptedStepProcess, samples) -> np.ndarray:
    """sum_j a_j (W_{(j+1)/N} - W_{j/N}) on each sample row."""
    samples = np.asarray(samples, dtype=np.float64)
    values = process.values_batch(samples)
    return np.sum(values * samples, axis=1) / sqrt(process.n_slots)


def ito_integral(process: AdaptedStepProcess, path: Path) -> float:
    """Stochastic integral of an adapted step process along one path."""
    incr = path.increments
    if len(incr) != process.n_slots:
        raise DimensionMismatchError("path and process grids differ")
    coords = incr * sqrt(process.n_slots)
    values = process.values_batch(coords[None, :])[0]
    return float(values @ incr)


# -- Wick exponentials ---------------------------------------------------------


class WickExponential:
    """exp(delta h - |h|^2/2): exact evaluator plus truncated chaos form."""

    def __init__(self, h: CameronMartinVector, order_cap: int = 8):
        self.h = h
        self.order_cap = int(order_cap)

    @property
    def dim(self):
        return self.h.dim

    def evaluate_batch(self, samples) -> np.ndarray:
        samples = np.asarray(samples, dtype=np.float64)
        return np.exp(samples @ self.h.coords - 0.5 * self.h.norm_sq())

    __call__ = evaluate_batch

    def gradient_batch(self, samples) -> np.ndarray:
        return self.evaluate_batch(samples)[:, None] * self.h.coords[None, :]

    def chaos(self, order_cap: int | None = None) -> ChaosExpansion:
        """Truncated expansion sum_{n<=cap} I_n(h^(x)n) / n!."""
        cap = self.order_cap if order_cap is None else int(order_cap)
        out = ChaosExpansion(self.dim)
        for n in range(cap + 1):
            kern = SymmetricKernel.rank_one(self.h.coords, n).scaled(
                1.0 / factorial(n)
            )
            if kern.coeffs:
                out.terms[n] = kern
        return out

    def truncation_bound(self, order_cap: int | None = None) -> float:
        """Bound on the squared L^2 norm of the dropped tail:
        exp(|h|^2) |h|^(2(cap+1)) / (cap+1)!."""
        cap = self.order_cap if order_cap is None else int(order_cap)
        s = self.h.norm_sq()
        return exp(s) * s ** (cap + 1) / factorial(cap + 1)

    def lp_norm(self, p: float) -> float:
        """Closed form ||exp(delta h - |h|^2/2)||_p = exp((p-1)|h|^2/2)."""
        return exp((p - 1.0) * self.h.norm_sq() / 2.0)

    def ou(self, t: float) -> "WickExponential":
        """Exact semigroup action: contracts h by exp(-t)."""
        if t < 0:
            raise ValueError("semigroup time must be nonnegative")
        return WickExponential(
            CameronMartinVector(exp(-t) * self.h.coords), self.order_cap
        )


def wick_exponential(h: CameronMartinVector, order_cap: int = 8) -> WickExponential:
    return WickExponential(h, order_cap)


# -- Girsanov ------------------------------------------------------------------


def girsanov_weight(process: AdaptedStepProcess, samples) -> np.ndarray:
    """exp(-sum_j a_j dW_j - 1/2 sum_j a_j^2 / N) on each sample row."""
    samples = np.asarray(samples, dtype=np.float64)
    n = process.n_slots
    values = process.values_batch(samples)
    ito = np.sum(values * samples, axis=1) / sqrt(n)
    quad = np.sum(values * values, axis=1) / n
    return np.exp(-ito - 0.5 * quad)


def girsanov_shift(process: AdaptedStepProcess, samples) -> np.ndarray:
    """Shifted coordinates of w -> w + int u dt: adds a_j / sqrt(N) slotwise."""
    samples = np.asarray(samples, dtype=np.float64)
    return samples + process.values_batch(samples) / sqrt(process.n_slots)


# -- Carleman-Fredholm determinants ---------------------------------------------


def det2(a) -> float | np.ndarray:
    """det(I+A) exp(-trace A); accepts one matrix or a stacked (M, d, d) array."""
    a = np.asarray(a, dtype=np.float64)
    eye = np.eye(a.shape[-1])
    sign, logabs = np.linalg.slogdet(eye + a)
    trace = np.trace(a, axis1=-2, axis2=-1)
    with np.errstate(over="ignore"):
        out = np.where(sign == 0.0, 0.0, sign * np.exp(logabs - trace))
    if a.ndim == 2:
        return float(out)
    return out


def det2_product_residual(a, b) -> float:
    """|det2(I+A) det2(I+B) - exp(trace AB) det2((I+A)(I+B))|."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError("matrices of different shape")
    eye = np.eye(a.shape[-1])
    product_arg = (eye + a) @ (eye + b) - eye
    lhs = det2(a) * det2(b)
    rhs = exp(np.trace(a @ b)) * det2(product_arg)
    return abs(lhs - rhs)


# -- anticipative shifts ---------------------------------------------------------


class ShiftMap:
    """Coordinate shift u with its Jacobian and norm certificates.

    ``u`` maps (M, d) samples to (M, d) Cameron-Martin coordinates; the
    Jacobian is exact for chaos-backed shifts and a central difference for
    black boxes.  Anticipative density evaluation requires a certified
    operator-norm bound strictly below one.
    """

    def __init__(self, fn, jacobian_fn, dim, op_norm_bound=None,
                 hs_norm_bound=None, lower_triangular=False):
        self._fn = fn
        self._jac = jacobian_fn
        self.dim = dim
        self.op_norm_bound = op_norm_bound
        self.hs_norm_bound = hs_norm_bound
        self.lower_triangular = lower_triangular

    @classmethod
    def from_chaos(cls, u: HValuedExpansion, op_norm_bound=None, hs_norm_bound=None):
        d = u.dim
        grads = [comp.derivative() for comp in u.components]

        def fn(samples):
            return u.evaluate_batch(samples)

        def jac(samples):
            samples = np.asarray(samples, dtype=np.float64)
            out = np.empty((samples.shape[0], d, d))
            for j in range(d):
                out[:, j, :] = grads[j].evaluate_batch(samples)
            return out

        return cls(fn, jac, d, op_norm_bound, hs_norm_bound)

    @classmethod
    def from_function(cls, fn, dim, jacobian=None, fd_step=1e-4,
                      op_norm_bound=None, hs_norm_bound=None):
        if jacobian is None:
            def jacobian(samples, fn=fn, dim=dim, eps=fd_step):
                samples = np.asarray(samples, dtype=np.float64)
                out = np.empty((samples.shape[0], dim, dim))
                for k in range(dim):
                    up = samples.copy()
                    up[:, k] += eps
                    down = samples.copy()
                    down[:, k] -= eps
                    out[:, :, k] = (np.asarray(fn(up)) - np.asarray(fn(down))) / (2 * eps)
                return out

        return cls(fn, jacobian, dim, op_norm_bound, hs_norm_bound)

    @classmethod
    def from_adapted(cls, process: AdaptedStepProcess):
        """Adapted integrand as an H-valued shift: coordinates a_j / sqrt(N).

        The Jacobian is strictly lower triangular, so det2 = 1 and the
        anticipative density reduces to the Girsanov weight.
        """
        if not process.verified:
            raise AdaptednessError("only structurally verified processes convert")
        d = process.n_slots
        root_n = sqrt(d)
        comps = []
        for entry in process.entries:
            comps.append(entry.scaled(1.0 / root_n))
        shift = cls.from_chaos(HValuedExpansion(comps))
        shift.lower_triangular = True
        return shift

    def apply(self, samples) -> np.ndarray:
        return np.asarray(samples, dtype=np.float64) + self.values(samples)

    def values(self, samples) -> np.ndarray:
        vals = np.asarray(self._fn(np.asarray(samples, dtype=np.float64)))
        return vals

    def jacobian(self, samples) -> np.ndarray:
        return np.asarray(self._jac(np.asarray(samples, dtype=np.float64)))

    def certify(self, pool: SamplePool, margin: float = 1.1, iters: int = 80):
        """Estimate sup-norm certificates over the pool by power iteration,
        inflated by a safety margin, and record them on the shift."""
        jac = self.jacobian(pool.samples)
        gram = np.einsum("mij,mik->mjk", jac, jac)
        rng = pool.child_rng(0x5EED)
        v = rng.standard_normal(self.dim)
        v /= np.linalg.norm(v)
        vecs = np.broadcast_to(v, (jac.shape[0], self.dim)).copy()
        for _ in range(iters):
            vecs = np.einsum("mjk,mk->mj", gram, vecs)
            norms = np.linalg.norm(vecs, axis=1, keepdims=True)
            norms[norms == 0.0] = 1.0
            vecs /= norms
        rayleigh = np.einsum("mj,mjk,mk->m", vecs, gram, vecs)
        self.op_norm_bound = float(np.sqrt(rayleigh.max()) * margin)
        hs = np.sqrt(np.sum(jac * jac, axis=(1, 2)).max())
        self.hs_norm_bound = float(hs * margin)
        return self.op_norm_bound, self.hs_norm_bound


def ramer_density(shift: ShiftMap, samples) -> np.ndarray:
    """|det2(I + grad u)| exp(-delta u - |u|^2/2) on each sample row,
    with delta u(x) = <u(x), x> - trace(grad u(x))."""
    if shift.op_norm_bound is None:
        raise RamerHypothesisError(
            "shift has no operator-norm certificate; call certify() or set one"
        )
    if shift.op_norm_bound >= 1.0:
        raise RamerHypothesisError(
            f"certified operator norm {shift.op_norm_bound:.3f} is not below 1"
        )
    samples = np.asarray(samples, dtype=np.float64)
    squeeze = samples.ndim == 1
    if squeeze:
        samples = samples[None, :]
    u = shift.values(samples)
    jac = shift.jacobian(samples)
    trace = np.trace(jac, axis1=-2, axis2=-1)
    div = np.sum(u * samples, axis=1) - trace
    dets = np.abs(det2(jac))
    out = dets * np.exp(-div - 0.5 * np.sum(u * u, axis=1))
    return float(out[0]) if squeeze else out


@dataclass
class DensityReport:
    """Two sides of a change-of-measure identity with its statistical verdict."""

    lhs: float
    rhs: float
    residual: float
    se: float
    n_samples: int
    passed: bool

    @property
    def estimate(self):
        return self.lhs

    @property
    def std_error(self):
        return self.se

    @property
    def identity_residual(self):
        return self.residual

    def to_json(self):
        return json.dumps({
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "se": self.se,
            "n": self.n_samples,
            "pass": self.passed,
        })


def verify_change_of_measure(f, shift, pool: SamplePool,
                             se_factor: float = 4.0) -> DensityReport:
    """Check E[F(T(w)) Lambda] = E[Lambda] E[F] by Monte Carlo.

    ``shift`` is an AdaptedStepProcess (Girsanov weight) or a certified
    ShiftMap (anticipative density).  ``f`` maps (M, d) samples to M values.
    The standard error of the difference uses the influence function of
    mean(a) - mean(Lambda) mean(b), accounting for shared samples.
    """
    x = pool.samples
    if isinstance(shift, AdaptedStepProcess):
        lam = girsanov_weight(shift, x)
        shifted = girsanov_shift(shift, x)
    else:
        lam = ramer_density(shift, x)
        shifted = shift.apply(x)
    a = np.asarray(f(shifted), dtype=np.float64) * lam
    b = np.asarray(f(x), dtype=np.float64)
    a_bar, b_bar, c_bar = a.mean(), b.mean(), lam.mean()
    diff = a_bar - c_bar * b_bar
    influence = (a - a_bar) - b_bar * (lam - c_bar) - c_bar * (b - b_bar)
    se = float(np.std(influence, ddof=1) / sqrt(len(a)))
    return DensityReport(
        lhs=float(a_bar),
        rhs=float(c_bar * b_bar),
        residual=float(diff),
        se=se,
        n_samples=len(a),
        passed=bool(abs(diff) <= se_factor * se),
    )
