"""Exact algebra of finite Wiener-chaos expansions.

A functional is stored as a finite sum over orders n of n-th multiple
integrals I_n(f_n) with symmetric coefficient tensors f_n over the d basis
directions.  Normalization throughout: E[I_n(f) I_n(g)] = n! <f, g>.

Tensor storage is sparse: a kernel keeps one float per *sorted* multi-index
(i_1 <= ... <= i_n), holding the value of the fully symmetric tensor at that
index.  A sorted index alpha with direction multiplicities m_1, ..., m_d
stands for w_alpha = n!/prod(m_j!) equal components, so

    ||f||^2        = sum_alpha w_alpha f[alpha]^2,
    I_n(f)(x)      = sum_alpha w_alpha f[alpha] prod_j H_{m_j}(x_j),

with H_m the probabilists' Hermite polynomials.  The second line is the
evaluation rule used by every Monte Carlo estimator in the package; its
batch form is the jitted hot kernel in ``_accel``.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb, exp, factorial, sqrt

import numpy as np

from ._accel import eval_terms, hermite_batch_numpy
from .gaussian import CameronMartinVector, DimensionMismatchError, SamplePool

DEFAULT_ORDER_CAP = 6


class OrderCapError(ValueError):
    """A product would create chaos terms above the configured order cap."""


def hermite_value(n, x):
    """Probabilists' Hermite polynomial H_n evaluated elementwise."""
    return hermite_batch_numpy(np.asarray(x, dtype=np.float64), n)[n]


def _arrangements(alpha):
    """Number of distinct orderings of the sorted multi-index alpha."""
    w = factorial(len(alpha))
    for m in Counter(alpha).values():
        w //= factorial(m)
    return w


def _sub_multisets(common, m):
    """All multisets of size m drawn from a Counter of available counts."""
    items = sorted(common.items())

    def rec(pos, remaining):
        if remaining == 0:
            yield ()
            return
        if pos == len(items):
            return
        value, avail = items[pos]
        for take in range(min(avail, remaining), -1, -1):
            for rest in rec(pos + 1, remaining - take):
                yield (value,) * take + rest

    return rec(0, m)


class SymmetricKernel:
    """Sparse symmetric coefficient tensor of a single chaos order."""

    __slots__ = ("order", "dim", "coeffs")

    def __init__(self, order, dim, coeffs=None):
        if order < 0 or dim < 1:
            raise ValueError("order must be >= 0 and dim >= 1")
        self.order = int(order)
        self.dim = int(dim)
        self.coeffs = {}
        if coeffs:
            for idx, c in coeffs.items():
                self[idx] = self.get(idx) + c

    # -- construction ------------------------------------------------------

    @classmethod
    def zero(cls, order, dim):
        return cls(order, dim)

    @classmethod
    def elementary(cls, dim, indices):
        """Symmetrized elementary tensor e_{i_1} (x) ... (x) e_{i_n}.

        Component value is prod(m_j!)/n! at the sorted index, which makes
        e.g. ``elementary(d, (0, 1))`` the half-sum of the two transposed
        rank-one products.
        """
        idx = tuple(sorted(indices))
        n = len(idx)
        value = 1.0
        for m in Counter(idx).values():
            value *= factorial(m)
        value /= factorial(n) if n else 1
        return cls(n, dim, {idx: value})

    @classmethod
    def rank_one(cls, vec, order):
        """Tensor power h^(x)order of a coordinate vector (already symmetric)."""
        vec = np.asarray(vec, dtype=np.float64)
        dim = len(vec)
        if order == 0:
            return cls(0, dim, {(): 1.0})
        support = [j for j in range(dim) if vec[j] != 0.0]
        coeffs = {}
        for idx in combinations_with_replacement(support, order):
            value = 1.0
            for j in idx:
                value *= vec[j]
            if value != 0.0:
                coeffs[idx] = value
        return cls(order, dim, coeffs)

    # -- mapping access ----------------------------------------------------

    def get(self, idx):
        return self.coeffs.get(tuple(sorted(idx)), 0.0)

    def __setitem__(self, idx, value):
        idx = tuple(sorted(idx))
        if len(idx) != self.order:
            raise ValueError(f"index {idx} has wrong length for order {self.order}")
        if idx and (idx[0] < 0 or idx[-1] >= self.dim):
            raise ValueError(f"index {idx} out of range for dim {self.dim}")
        if value == 0.0:
            self.coeffs.pop(idx, None)
        else:
            self.coeffs[idx] = float(value)

    def items(self):
        return self.coeffs.items()

    def copy(self):
        return SymmetricKernel(self.order, self.dim, dict(self.coeffs))

    # -- linear algebra ----------------------------------------------------

    def scaled(self, a):
        return SymmetricKernel(
            self.order, self.dim, {idx: a * c for idx, c in self.coeffs.items()}
        )

    def add(self, other):
        if (self.order, self.dim) != (other.order, other.dim):
            raise DimensionMismatchError("kernels of different order or dim")
        out = self.copy()
        for idx, c in other.items():
            out[idx] = out.get(idx) + c
        return out

    def inner(self, other):
        """Full tensor inner product <f, g> (multiplicity-weighted)."""
        if (self.order, self.dim) != (other.order, other.dim):
            raise DimensionMismatchError("kernels of different order or dim")
        small, big = sorted((self, other), key=lambda k: len(k.coeffs))
        return float(
            sum(_arrangements(idx) * c * big.get(idx) for idx, c in small.items())
        )

    def norm_sq(self):
        return self.inner(self)

    def norm(self):
        return sqrt(self.norm_sq())


def contract(f: SymmetricKernel, g: SymmetricKernel, m: int) -> SymmetricKernel:
    """Symmetrized contraction of order m: pair m slots, then symmetrize.

    For sorted indices alpha of f and beta of g and every common
    sub-multiset kappa of size m, the pair contributes

        f[alpha] g[beta] * (m!/prod kappa!) * prod_j C(r_j, s_j) / C(p+q-2m, p-m)

    to the output component at (alpha \\ kappa) U (beta \\ kappa), where r
    counts the output index and s counts alpha \\ kappa.  The weights are the
    exact symmetrization factors of the elementary tensors involved.
    """
    if f.dim != g.dim:
        raise DimensionMismatchError("contracting kernels of different dim")
    p, q = f.order, g.order
    if m < 0 or m > min(p, q):
        raise ValueError(f"contraction order {m} out of range for orders {p}, {q}")
    out = SymmetricKernel(p + q - 2 * m, f.dim)
    denom = comb(p + q - 2 * m, p - m)
    for alpha, a in f.items():
        ca = Counter(alpha)
        for beta, b in g.items():
            cb = Counter(beta)
            common = Counter({v: min(ca[v], cb[v]) for v in ca if v in cb})
            if sum(common.values()) < m:
                continue
            for kappa in _sub_multisets(common, m):
                ck = Counter(kappa)
                mu = ca - ck
                nu = cb - ck
                w = tuple(sorted((mu + nu).elements()))
                weight = factorial(m)
                for cnt in ck.values():
                    weight /= factorial(cnt)
                rw = Counter(w)
                for v, s in mu.items():
                    weight *= comb(rw[v], s)
                out[w] = out.get(w) + a * b * weight / denom
    return out


def raw_contraction_norm(f: SymmetricKernel, g: SymmetricKernel, m: int = 1) -> float:
    """Norm of the *non-symmetrized* contraction f (x)_m g.

    The symmetrized contraction can vanish for dependent pairs (block
    antisymmetry cancels it), so independence must be decided on the raw
    two-block tensor.
    """
    if f.dim != g.dim:
        raise DimensionMismatchError("contracting kernels of different dim")
    p, q = f.order, g.order
    if m < 1 or m > min(p, q):
        raise ValueError(f"contraction order {m} out of range for orders {p}, {q}")
    if m != 1:
        raise NotImplementedError("only single-slot raw contractions are used")

    values = {}
    for alpha, a in f.items():
        for pos in set(alpha):
            mu = list(alpha)
            mu.remove(pos)
            mu = tuple(mu)
            for beta, b in g.items():
                if pos not in beta:
                    continue
                nu = list(beta)
                nu.remove(pos)
                nu = tuple(nu)
                values[mu, nu] = values.get((mu, nu), 0.0) + a * b
    total = 0.0
    for (mu, nu), v in values.items():
        total += _arrangements(mu) * _arrangements(nu) * v * v
    return sqrt(total)


def independence_residual(f: SymmetricKernel, g: SymmetricKernel) -> float:
    """Norm of f (x)_1 g; zero exactly when I_p(f) and I_q(g) are independent."""
    if f.order < 1 or g.order < 1:
        raise ValueError("independence criterion needs orders >= 1")
    return raw_contraction_norm(f, g, 1)


class ChaosExpansion:
    """Finite chaos expansion: a map order -> SymmetricKernel over dim d."""

    __slots__ = ("dim", "terms")

    def __init__(self, dim, terms=None):
        self.dim = int(dim)
        self.terms = {}
        if terms:
            for n, k in terms.items():
                if k.dim != self.dim:
                    raise DimensionMismatchError("kernel dim differs from expansion dim")
                if k.order != n:
                    raise ValueError("kernel order does not match its key")
                if k.coeffs:
                    self.terms[int(n)] = k.copy()

    # -- construction ------------------------------------------------------

    @classmethod
    def constant(cls, value, dim):
        out = cls(dim)
        if value != 0.0:
            out.terms[0] = SymmetricKernel(0, dim, {(): float(value)})
        return out

    @classmethod
    def first_order(cls, h, dim=None):
        """I_1(h) = delta h for a coordinate vector or Cameron-Martin vector."""
        coords = h.coords if isinstance(h, CameronMartinVector) else np.asarray(h, float)
        dim = len(coords) if dim is None else dim
        return cls(dim, {1: SymmetricKernel.rank_one(coords, 1)})

    @classmethod
    def single(cls, kernel: SymmetricKernel):
        return cls(kernel.dim, {kernel.order: kernel})

    def copy(self):
        return ChaosExpansion(self.dim, self.terms)

    # -- basic functionals ---------------------------------------------------

    @property
    def max_order(self):
        return max(self.terms) if self.terms else 0

    def kernel(self, n):
        return self.terms.get(n, SymmetricKernel(n, self.dim))

    def expectation(self):
        return self.kernel(0).get(())

    def inner(self, other: "ChaosExpansion") -> float:
        """L^2 inner product E[F G] = sum_n n! <f_n, g_n>."""
        if self.dim != other.dim:
            raise DimensionMismatchError("expansions of different dim")
        total = 0.0
        for n, k in self.terms.items():
            if n in other.terms:
                total += factorial(n) * k.inner(other.terms[n])
        return total

    def l2_norm_sq(self):
        return self.inner(self)

    def variance(self):
        return self.l2_norm_sq() - self.expectation() ** 2

    # -- linear structure ----------------------------------------------------

    def scaled(self, a):
        return ChaosExpansion(
            self.dim, {n: k.scaled(a) for n, k in self.terms.items()}
        )

    def add(self, other):
        if self.dim != other.dim:
            raise DimensionMismatchError("expansions of different dim")
        out = self.copy()
        for n, k in other.terms.items():
            if n in out.terms:
                merged = out.terms[n].add(k)
                if merged.coeffs:
                    out.terms[n] = merged
                else:
                    del out.terms[n]
            elif k.coeffs:
                out.terms[n] = k.copy()
        return out

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = ChaosExpansion.constant(other, self.dim)
        return self.add(other)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = ChaosExpansion.constant(other, self.dim)
        return self.add(other.scaled(-1.0))

    def __mul__(self, a):
        return self.scaled(float(a))

    __rmul__ = __mul__
    __radd__ = __add__

    # -- evaluation ----------------------------------------------------------

    def _packed(self):
        coeffs, ptr, dirs, mults = [], [0], [], []
        for n in sorted(self.terms):
            for idx, c in sorted(self.terms[n].items()):
                coeffs.append(c * _arrangements(idx))
                for j, m in sorted(Counter(idx).items()):
                    dirs.append(j)
                    mults.append(m)
                ptr.append(len(dirs))
        return (
            np.asarray(coeffs, dtype=np.float64),
            np.asarray(ptr, dtype=np.int64),
            np.asarray(dirs, dtype=np.int32),
            np.asarray(mults, dtype=np.int32),
        )

    def evaluate_batch(self, samples: np.ndarray) -> np.ndarray:
        """Pointwise values at every row of an (M, d) sample matrix."""
        samples = np.ascontiguousarray(samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"expected samples of shape (M, {self.dim}), got {samples.shape}"
            )
        coeffs, ptr, dirs, mults = self._packed()
        return eval_terms(coeffs, ptr, dirs, mults, samples)

    def evaluate(self, coords) -> float:
        coords = np.asarray(coords, dtype=np.float64)
        if coords.shape != (self.dim,):
            raise DimensionMismatchError(
                f"expected {self.dim} coordinates, got shape {coords.shape}"
            )
        return float(self.evaluate_batch(coords[None, :])[0])

    def __call__(self, samples):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim == 1:
            return self.evaluate(samples)
        return self.evaluate_batch(samples)

    # -- operators -----------------------------------------------------------

    def derivative(self) -> "HValuedExpansion":
        """Gradient: component j holds sum_n n I_{n-1}(f_n (x)_1 e_j)."""
        comps = [ChaosExpansion(self.dim) for _ in range(self.dim)]
        for n, kern in self.terms.items():
            if n == 0:
                continue
            for idx, c in kern.items():
                for j in set(idx):
                    reduced = list(idx)
                    reduced.remove(j)
                    comp = comps[j]
                    if n - 1 not in comp.terms:
                        comp.terms[n - 1] = SymmetricKernel(n - 1, self.dim)
                    k = comp.terms[n - 1]
                    key = tuple(reduced)
                    k[key] = k.get(key) + n * c
        for comp in comps:
            comp.terms = {n: k for n, k in comp.terms.items() if k.coeffs}
        return HValuedExpansion(comps)

    def number_op(self) -> "ChaosExpansion":
        """Multiply the order-n kernel by n (generator of the OU semigroup)."""
        return ChaosExpansion(
            self.dim, {n: k.scaled(float(n)) for n, k in self.terms.items() if n > 0}
        )

    def ou_semigroup(self, t: float) -> "ChaosExpansion":
        """Spectral action: the order-n kernel is scaled by exp(-n t)."""
        if t < 0:
            raise ValueError("semigroup time must be nonnegative")
        return ChaosExpansion(
            self.dim, {n: k.scaled(exp(-n * t)) for n, k in self.terms.items()}
        )

    def project_adapted(self, n_revealed: int) -> "ChaosExpansion":
        """Conditional expectation given the first ``n_revealed`` slots.

        Drops every coefficient whose multi-index uses a direction >=
        n_revealed; exact because unrevealed Hermite factors are centered.
        """
        if not 0 <= n_revealed <= self.dim:
            raise ValueError(f"slot count {n_revealed} out of range 0..{self.dim}")
        out = ChaosExpansion(self.dim)
        for n, kern in self.terms.items():
            kept = {
                idx: c
                for idx, c in kern.items()
                if not idx or idx[-1] < n_revealed
            }
            if kept:
                out.terms[n] = SymmetricKernel(n, self.dim, kept)
        return out

    def shift(self, h: CameronMartinVector) -> "ChaosExpansion":
        """Expansion of w -> F(w + h) via the binomial contraction rule

            I_p(f)(w + h) = sum_i C(p, i) I_{p-i}(f (x)_i h^(x)i).
        """
        if h.dim != self.dim:
            raise DimensionMismatchError("shift dimension differs from expansion")
        out = ChaosExpansion(self.dim)
        for p, kern in self.terms.items():
            for i in range(p + 1):
                contracted = contract(kern, SymmetricKernel.rank_one(h.coords, i), i)
                piece = contracted.scaled(float(comb(p, i)))
                if not piece.coeffs:
                    continue
                n = p - i
                if n in out.terms:
                    out.terms[n] = out.terms[n].add(piece)
                else:
                    out.terms[n] = piece
        out.terms = {n: k for n, k in out.terms.items() if k.coeffs}
        return out

    # -- serialization ---------------------------------------------------------

    def to_json_dict(self):
        return {
            "dim": self.dim,
            "terms": [
                {
                    "order": n,
                    "entries": [
                        {"index": list(idx), "coeff": c}
                        for idx, c in sorted(self.terms[n].items())
                    ],
                }
                for n in sorted(self.terms)
            ],
        }

    def dumps(self):
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, data):
        out = cls(data["dim"])
        for term in data["terms"]:
            n = term["order"]
            kern = SymmetricKernel(n, out.dim)
            for entry in term["entries"]:
                idx = tuple(entry["index"])
                kern[idx] = kern.get(idx) + entry["coeff"]
            if kern.coeffs:
                out.terms[n] = kern
        return out

    @classmethod
    def loads(cls, text):
        return cls.from_json_dict(json.loads(text))


def multiply(F: ChaosExpansion, G: ChaosExpansion,
             order_cap: int = DEFAULT_ORDER_CAP) -> ChaosExpansion:
    """Product of two expansions by the contraction rule

        I_p(f) I_q(g) = sum_m p! q! / (m! (p-m)! (q-m)!) I_{p+q-2m}(f (x)_m g),

    extended bilinearly.  Raises OrderCapError instead of truncating when a
    term pair would exceed ``order_cap``.
    """
    if F.dim != G.dim:
        raise DimensionMismatchError("multiplying expansions of different dim")
    over = [
        (p, q)
        for p in F.terms
        for q in G.terms
        if p + q > order_cap
    ]
    if over:
        raise OrderCapError(
            f"product terms {over} exceed the order cap {order_cap}"
        )
    out = ChaosExpansion(F.dim)
    for p, f in F.terms.items():
        for q, g in G.terms.items():
            for m in range(min(p, q) + 1):
                coeff = factorial(p) * factorial(q) / (
                    factorial(m) * factorial(p - m) * factorial(q - m)
                )
                piece = contract(f, g, m).scaled(coeff)
                if not piece.coeffs:
                    continue
                n = p + q - 2 * m
                if n in out.terms:
                    out.terms[n] = out.terms[n].add(piece)
                else:
                    out.terms[n] = piece
    out.terms = {n: k for n, k in out.terms.items() if k.coeffs}
    return out


class HValuedExpansion:
    """Vector of chaos expansions: one component per basis direction."""

    __slots__ = ("components",)

    def __init__(self, components):
        components = list(components)
        if not components:
            raise ValueError("need at least one component")
        dim = components[0].dim
        if any(c.dim != dim for c in components):
            raise DimensionMismatchError("components of mixed dim")
        if len(components) != dim:
            raise DimensionMismatchError(
                f"expected {dim} components, got {len(components)}"
            )
        self.components = components

    @property
    def dim(self):
        return self.components[0].dim

    @classmethod
    def constant(cls, vec):
        vec = np.asarray(vec, dtype=np.float64)
        return cls([ChaosExpansion.constant(v, len(vec)) for v in vec])

    def evaluate_batch(self, samples) -> np.ndarray:
        """(M, d) matrix of component values."""
        samples = np.asarray(samples, dtype=np.float64)
        out = np.empty((samples.shape[0], self.dim))
        for j, comp in enumerate(self.components):
            out[:, j] = comp.evaluate_batch(samples)
        return out

    def norm_sq_batch(self, samples) -> np.ndarray:
        vals = self.evaluate_batch(samples)
        return np.sum(vals * vals, axis=1)

    def divergence(self) -> ChaosExpansion:
        """Adjoint of the derivative: component kernels of order n feed
        I_{n+1}(sym(u_j (x) e_j)), making E[(delta u) F] = E[(u, grad F)]
        an exact coefficient identity."""
        dim = self.dim
        out = ChaosExpansion(dim)
        for j, comp in enumerate(self.components):
            for n, kern in comp.terms.items():
                target = out.terms.get(n + 1)
                if target is None:
                    target = SymmetricKernel(n + 1, dim)
                    out.terms[n + 1] = target
                for idx, c in kern.items():
                    w = tuple(sorted(idx + (j,)))
                    mult_j = w.count(j)
                    target[w] = target.get(w) + c * mult_j / (n + 1)
        out.terms = {n: k for n, k in out.terms.items() if k.coeffs}
        return out


def divergence(u: HValuedExpansion) -> ChaosExpansion:
    return u.divergence()


def derivative(F: ChaosExpansion) -> HValuedExpansion:
    return F.derivative()


def number_op(F: ChaosExpansion) -> ChaosExpansion:
    return F.number_op()


def ou_semigroup(F: ChaosExpansion, t: float) -> ChaosExpansion:
    return F.ou_semigroup(t)


def project_adapted(F: ChaosExpansion, n_revealed: int) -> ChaosExpansion:
    return F.project_adapted(n_revealed)


def cm_shift_chaos(F: ChaosExpansion, h: CameronMartinVector) -> ChaosExpansion:
    return F.shift(h)


def mehler_apply(f, t: float, coords, pool: SamplePool):
    """Monte Carlo value of the OU semigroup at one point.

    Averages f(e^{-t} x + sqrt(1 - e^{-2t}) y) over the pool rows y, where f
    maps an (M, d) matrix to M values.  Returns (estimate, standard error).
    """
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    coords = np.asarray(coords, dtype=np.float64)
    if pool.n_samples == 0:
        raise ValueError("empty sample pool")
    if t == 0.0:
        return float(np.asarray(f(coords[None, :]))[0]), 0.0
    mixed = exp(-t) * coords[None, :] + sqrt(1.0 - exp(-2.0 * t)) * pool.samples
    vals = np.asarray(f(mixed), dtype=np.float64)
    est = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / sqrt(len(vals))) if len(vals) > 1 else 0.0
    return est, se


# -- Clark integrands ---------------------------------------------------------

def clark_integrands(F: ChaosExpansion) -> list[ChaosExpansion]:
    """Predictable integrands of the martingale representation of F.

    Slot j (0-based) carries sqrt(N) * E[(grad F)_j | first j slots]: the
    step value of the conditioned time-density of the gradient, so that
    F = E[F] + sum_j integrand_j * (W_{(j+1)/N} - W_{j/N}) holds exactly for
    finite expansions.
    """
    grad = F.derivative()
    root_n = sqrt(F.dim)
    return [
        grad.components[j].project_adapted(j).scaled(root_n)
        for j in range(F.dim)
    ]


def clark_reconstruct(F: ChaosExpansion, samples: np.ndarray) -> np.ndarray:
    """Evaluate E[F] + sum_j E[(grad F)_j | F_j] gamma_j on sample rows.

    Equals the stochastic-integral reconstruction, since the sqrt(N) density
    scaling and the 1/sqrt(N) increment scaling cancel against each other.
    """
    samples = np.asarray(samples, dtype=np.float64)
    grad = F.derivative()
    out = np.full(samples.shape[0], F.expectation())
    for j in range(F.dim):
        proj = grad.components[j].project_adapted(j)
        if proj.terms:
            out += proj.evaluate_batch(samples) * samples[:, j]
    return out


# -- Stroock coefficient estimation -------------------------------------------

_STENCILS = {
    1: ((1, 0.5), (-1, -0.5)),
    2: ((1, 1.0), (0, -2.0), (-1, 1.0)),
    3: ((2, 0.5), (1, -1.0), (-1, 1.0), (-2, -0.5)),
    4: ((2, 1.0), (1, -4.0), (0, 6.0), (-1, -4.0), (-2, 1.0)),
}


@dataclass
class StroockResult:
    """Estimated expansion plus per-coefficient errors and a step diagnostic."""

    expansion: ChaosExpansion
    std_errors: dict
    richardson: dict


def _mixed_difference(f, samples, idx, step):
    """Per-sample central-difference estimate of the mixed partial d^alpha f."""
    mult = sorted(Counter(idx).items())
    points = [({}, 1.0)]
    for j, m in mult:
        new_points = []
        for offsets, weight in points:
            for off, w in _STENCILS[m]:
                merged = dict(offsets)
                merged[j] = off
                new_points.append((merged, weight * w / step ** m))
        points = new_points
    acc = np.zeros(samples.shape[0])
    for offsets, weight in points:
        shifted = samples.copy()
        for j, off in offsets.items():
            if off:
                shifted[:, j] += off * step
        acc += weight * np.asarray(f(shifted), dtype=np.float64)
    return acc


def stroock_kernels(f, max_order: int, pool: SamplePool,
                    fd_step: float = 1e-3) -> StroockResult:
    """Chaos coefficients of a black-box functional from averaged derivatives.

    The order-n kernel at index alpha is E[d^alpha f] / n!, estimated by
    mixed central differences averaged over the pool.  ``f`` must map an
    (M, d) matrix to M values.  The richardson entry reports the change
    under step halving (an O(step^2) consistency diagnostic).
    """
    if max_order > 4:
        raise ValueError("max_order above 4 is not supported (cost control)")
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    if pool.n_samples == 0:
        raise ValueError("empty sample pool")
    d = pool.dim
    samples = pool.samples
    m_rows = samples.shape[0]
    expansion = ChaosExpansion(d)
    std_errors = {}
    richardson = {}

    base = np.asarray(f(samples), dtype=np.float64)
    c0 = float(np.mean(base))
    if c0 != 0.0:
        expansion.terms[0] = SymmetricKernel(0, d, {(): c0})
    std_errors[0, ()] = float(np.std(base, ddof=1) / sqrt(m_rows))

    for n in range(1, max_order + 1):
        kern = SymmetricKernel(n, d)
        fact = factorial(n)
        for idx in combinations_with_replacement(range(d), n):
            per_sample = _mixed_difference(f, samples, idx, fd_step)
            est = float(np.mean(per_sample)) / fact
            se = float(np.std(per_sample, ddof=1) / sqrt(m_rows)) / fact
            half = _mixed_difference(f, samples, idx, fd_step / 2.0)
            richardson[n, idx] = abs(float(np.mean(half)) / fact - est)
            if est != 0.0:
                kern[idx] = est
            std_errors[n, idx] = se
        if kern.coeffs:
            expansion.terms[n] = kern
    return StroockResult(expansion, std_errors, richardson)
