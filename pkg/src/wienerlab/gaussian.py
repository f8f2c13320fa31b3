"""Discretized Wiener space: time grid, Gaussian coordinates, paths.

The interval [0,1] is split into N uniform slots.  The orthonormal basis of
L^2[0,1] is the family of normalized slot indicators g_j = sqrt(N) 1_slot_j,
so the integrated basis evaluates to e~_j(k/N) = 1_{j<=k} / sqrt(N) at grid
nodes and a Brownian path is the scaled cumulative sum of i.i.d. standard
Gaussian coordinates.  Adaptedness and conditional expectations then become
exact index-support operations on coefficient tensors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Rows per Philox stream chunk.  Pools are generated chunk by chunk, each
# chunk from its own jumped stream, so parallel and serial generation agree
# bit for bit.
POOL_CHUNK = 1 << 16


class DimensionMismatchError(ValueError):
    """Inputs whose coordinate dimensions do not agree."""


@dataclass(frozen=True)
class TimeGrid:
    """N uniform subintervals of [0,1]; slot j covers [(j-1)/N, j/N)."""

    n_slots: int

    def __post_init__(self):
        if self.n_slots < 1:
            raise ValueError("n_slots must be a positive integer")

    @property
    def nodes(self):
        return np.linspace(0.0, 1.0, self.n_slots + 1)

    @property
    def dt(self):
        return 1.0 / self.n_slots


@dataclass(frozen=True)
class Path:
    """Brownian path values at the N+1 grid nodes, starting at 0."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values[0] != 0.0:
            raise ValueError("a path must start at 0")

    @property
    def increments(self):
        return np.diff(self.values)

    @property
    def terminal(self):
        return float(self.values[-1])


@dataclass(frozen=True)
class CameronMartinVector:
    """Direction of quasi-invariant translation, stored as coefficients
    against the integrated basis e~_j."""

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=np.float64))

    @property
    def dim(self):
        return len(self.coords)

    def norm_sq(self):
        return float(self.coords @ self.coords)

    def norm(self):
        return float(np.sqrt(self.norm_sq()))

    def inner(self, other: "CameronMartinVector") -> float:
        """Inner product; in coordinates a plain dot product."""
        if self.dim != other.dim:
            raise DimensionMismatchError(
                f"dimensions differ: {self.dim} vs {other.dim}"
            )
        return float(self.coords @ other.coords)

    def values_at_nodes(self, grid: TimeGrid) -> np.ndarray:
        """h evaluated at the grid nodes: cumulative sum scaled by 1/sqrt(N).

        Between nodes h is linear; evaluation elsewhere would be the linear
        interpolant (all in-scope functionals use node values only).
        """
        if self.dim != grid.n_slots:
            raise DimensionMismatchError(
                f"vector has {self.dim} coords, grid {grid.n_slots} slots"
            )
        vals = np.empty(grid.n_slots + 1)
        vals[0] = 0.0
        np.cumsum(self.coords / np.sqrt(grid.n_slots), out=vals[1:])
        return vals

    def time_density(self, grid: TimeGrid) -> np.ndarray:
        """Per-slot value of dh/dt: sqrt(N) times the coordinates."""
        if self.dim != grid.n_slots:
            raise DimensionMismatchError(
                f"vector has {self.dim} coords, grid {grid.n_slots} slots"
            )
        return self.coords * np.sqrt(grid.n_slots)

    @classmethod
    def from_time_density(cls, density, grid: TimeGrid) -> "CameronMartinVector":
        """Build from per-slot values of dh/dt (inverse of time_density)."""
        density = np.asarray(density, dtype=np.float64)
        if len(density) != grid.n_slots:
            raise DimensionMismatchError(
                f"{len(density)} slot values for a grid with {grid.n_slots} slots"
            )
        return cls(density / np.sqrt(grid.n_slots))


def cm_inner(h: CameronMartinVector, k: CameronMartinVector) -> float:
    """Cameron-Martin inner product of two directions."""
    return h.inner(k)


def shift_coords(coords, h: CameronMartinVector) -> np.ndarray:
    """Translate a coordinate sample (or an (M,d) batch) by h."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape[-1] != h.dim:
        raise DimensionMismatchError(
            f"coords have dimension {coords.shape[-1]}, shift has {h.dim}"
        )
    return coords + h.coords


def synthesize_path(coords, grid: TimeGrid) -> Path:
    """Path with increments gamma_j / sqrt(N) from Gaussian coordinates."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 1 or len(coords) != grid.n_slots:
        raise DimensionMismatchError(
            f"expected {grid.n_slots} coordinates, got shape {coords.shape}"
        )
    vals = np.empty(grid.n_slots + 1)
    vals[0] = 0.0
    np.cumsum(coords / np.sqrt(grid.n_slots), out=vals[1:])
    return Path(vals)


def synthesize_paths(samples: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Node values for a whole (M,d) sample matrix; rows are paths.

    Returns an (M, N+1) array; column 0 is zero.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[1] != grid.n_slots:
        raise DimensionMismatchError(
            f"samples have {samples.shape[1]} columns, grid {grid.n_slots} slots"
        )
    out = np.zeros((samples.shape[0], grid.n_slots + 1))
    np.cumsum(samples / np.sqrt(grid.n_slots), axis=1, out=out[:, 1:])
    return out


def _philox_chunk(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)).jumped(chunk_index))


def derived_seed(seed: int, tag: int) -> int:
    """Deterministic child seed for auxiliary randomness (resampling,
    Mehler noise, cycle sampling), independent of the parent stream."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tag),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SamplePool:
    """Matrix of i.i.d. N(0, I_d) coordinate rows with a reproducible seed.

    Generation is chunked over jumped Philox streams: chunk k of POOL_CHUNK
    rows comes from stream ``Philox(key=seed).jumped(k)``, so any partition
    of the chunks across workers reproduces the serial output bit-exactly.
    """

    samples: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def generate(cls, seed: int, n_samples: int, dim: int) -> "SamplePool":
        if n_samples < 1 or dim < 1:
            raise ValueError("n_samples and dim must be positive")
        blocks = []
        for k in range(0, n_samples, POOL_CHUNK):
            rows = min(POOL_CHUNK, n_samples - k)
            gen = _philox_chunk(seed, k // POOL_CHUNK)
            blocks.append(gen.standard_normal((rows, dim)))
        return cls(np.vstack(blocks), seed)

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]

    def child(self, tag: int, n_samples: int | None = None, dim: int | None = None) -> "SamplePool":
        """Independent pool derived deterministically from this pool's seed."""
        return SamplePool.generate(
            derived_seed(self.seed, tag),
            n_samples if n_samples is not None else self.n_samples,
            dim if dim is not None else self.dim,
        )

    def child_rng(self, tag: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=np.uint64(derived_seed(self.seed, tag))))

    def to_csv(self, path):
        header = ",".join(f"g{j + 1}" for j in range(self.dim))
        np.savetxt(path, self.samples, delimiter=",", header=header,
                   comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path, seed: int = 0) -> "SamplePool":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data, seed)
