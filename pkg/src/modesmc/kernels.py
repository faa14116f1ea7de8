"""Stage-invariant Markov kernels, cell restriction, and spectral tooling.

Each kernel targets one annealed stage (its log density already includes
beta_v). Mutation pre-draws every random number for a whole (t, n) block
from the caller's stream and then applies steps chunk by chunk, so output
is identical no matter how many workers share the block.

Restriction follows the refuse-leaving-moves construction: a full base
step is simulated and the result is discarded (the particle stays put)
whenever it would land outside the particle's current cell. That
reproduces the restricted kernel exactly for any base kernel given as a
transition law, and makes the restricted chain invariant for the
within-cell conditional.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .families import AnnealedFamily, Partition


def default_step_variance(sigma: float, beta: float, d: int) -> float:
    """Classic random-walk scaling: 2.38^2 sigma^2 / (beta d)."""
    return 2.38**2 * sigma**2 / (beta * d)


def _row_chunks(n: int, workers: int):
    k = max(1, min(workers, n))
    edges = np.linspace(0, n, k + 1).astype(int)
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _run_chunked(task, n, workers):
    chunks = _row_chunks(n, workers)
    if len(chunks) == 1:
        task(chunks[0])
        return
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        list(pool.map(task, chunks))


class RandomWalkMetropolis:
    """Gaussian random-walk Metropolis on real vectors.

    proposal_std is the per-coordinate standard deviation of the proposal
    increment; the default comes from ``default_step_variance``.
    """

    kind = "real"

    def __init__(self, log_density: Callable, proposal_std: float, dim: int):
        if proposal_std <= 0:
            raise ValueError("proposal_std must be positive")
        self.log_density = log_density
        self.proposal_std = float(proposal_std)
        self.dim = int(dim)

    def mutate(self, states, t, rng, cells=None, partition=None, workers=1):
        x = np.array(states, dtype=float, copy=True)
        if t == 0:
            return x
        n = x.shape[0]
        noise = self.proposal_std * rng.standard_normal((t, n, self.dim))
        logu = np.log(rng.random((t, n)))
        logp = np.asarray(self.log_density(x), dtype=float)

        def task(sl):
            xs, lp = x[sl], logp[sl]
            cs = cells[sl] if cells is not None else None
            for s in range(t):
                y = xs + noise[s, sl]
                lpy = np.asarray(self.log_density(y), dtype=float)
                acc = logu[s, sl] < (lpy - lp)
                if partition is not None:
                    acc &= partition.classify(y) == cs
                xs[acc] = y[acc]
                lp[acc] = lpy[acc]
            x[sl], logp[sl] = xs, lp

        _run_chunked(task, n, workers)
        return x

    def step(self, states, rng, cells=None, partition=None):
        return self.mutate(states, 1, rng, cells=cells, partition=partition)


class SingleSiteFlip:
    """Metropolis kernel flipping one uniformly chosen spin per step."""

    kind = "spin"

    def __init__(self, log_density: Callable, dim: int):
        self.log_density = log_density
        self.dim = int(dim)

    def mutate(self, states, t, rng, cells=None, partition=None, workers=1):
        x = np.array(states, copy=True)
        if t == 0:
            return x
        n = x.shape[0]
        sites = rng.integers(0, self.dim, size=(t, n))
        logu = np.log(rng.random((t, n)))
        logp = np.asarray(self.log_density(x), dtype=float)

        def task(sl):
            xs, lp = x[sl], logp[sl]
            cs = cells[sl] if cells is not None else None
            rows = np.arange(xs.shape[0])
            for s in range(t):
                y = xs.copy()
                y[rows, sites[s, sl]] *= -1
                lpy = np.asarray(self.log_density(y), dtype=float)
                acc = logu[s, sl] < (lpy - lp)
                if partition is not None:
                    acc &= partition.classify(y) == cs
                xs[acc] = y[acc]
                lp[acc] = lpy[acc]
            x[sl], logp[sl] = xs, lp

        _run_chunked(task, n, workers)
        return x

    def step(self, states, rng, cells=None, partition=None):
        return self.mutate(states, 1, rng, cells=cells, partition=partition)


class DiscreteNeighborWalk:
    """Metropolized nearest-neighbor walk on an enumerated path of states."""

    kind = "index"

    def __init__(self, log_mass: np.ndarray):
        self.log_mass = np.asarray(log_mass, dtype=float)
        if self.log_mass.ndim != 1:
            raise ValueError("log_mass must be a vector over states")

    @property
    def n_states(self):
        return self.log_mass.size

    def mutate(self, states, t, rng, cells=None, partition=None, workers=1):
        x = np.array(states, dtype=np.int64, copy=True)
        if t == 0:
            return x
        n = x.shape[0]
        dirs = rng.integers(0, 2, size=(t, n)) * 2 - 1
        logu = np.log(rng.random((t, n)))
        lm = self.log_mass
        m = self.n_states

        def task(sl):
            xs = x[sl]
            cs = cells[sl] if cells is not None else None
            for s in range(t):
                y = xs + dirs[s, sl]
                valid = (y >= 0) & (y < m)
                ysafe = np.where(valid, y, xs)
                acc = valid & (logu[s, sl] < lm[ysafe] - lm[xs])
                if partition is not None:
                    acc &= partition.classify(ysafe) == cs
                xs[acc] = ysafe[acc]
            x[sl] = xs

        _run_chunked(task, n, workers)
        return x

    def step(self, states, rng, cells=None, partition=None):
        return self.mutate(states, 1, rng, cells=cells, partition=partition)

    def transition_matrix(self) -> np.ndarray:
        m = self.n_states
        P = np.zeros((m, m))
        lm = self.log_mass
        for i in range(m):
            for j in (i - 1, i + 1):
                if 0 <= j < m:
                    P[i, j] = 0.5 * min(1.0, math.exp(lm[j] - lm[i]))
            P[i, i] = 1.0 - P[i].sum()
        return P

    def mutate_counts(self, counts, t, rng, partition=None):
        """Advance a per-state population t steps (law-equivalent to mutate).

        Conditionally on the counts, particles move independently, so the
        next population is a sum of per-state multinomial splits along the
        exact transition rows.
        """
        P = self.transition_matrix()
        if partition is not None:
            labels = partition.classify(np.arange(self.n_states))
            P = restrict_transition_matrix(P, labels)
        counts = np.asarray(counts, dtype=np.int64).copy()
        for _ in range(t):
            new = np.zeros_like(counts)
            for i in np.flatnonzero(counts):
                new += rng.multinomial(counts[i], P[i])
            counts = new
        return counts


class IdentityKernel:
    """The do-nothing kernel; handy as a degenerate fixture."""

    kind = "any"

    def mutate(self, states, t, rng, cells=None, partition=None, workers=1):
        return np.array(states, copy=True)

    def step(self, states, rng, cells=None, partition=None):
        return np.array(states, copy=True)


@dataclass(frozen=True)
class RestrictedKernel:
    """A base kernel wrapped so moves leaving the current cell are refused."""

    base: object
    partition: Partition

    def step(self, states, cells, rng):
        return self.base.step(states, rng, cells=cells, partition=self.partition)

    def mutate(self, states, cells, t, rng, workers=1):
        return self.base.mutate(
            states, t, rng, cells=cells, partition=self.partition, workers=workers
        )

    def mutate_counts(self, counts, t, rng):
        return self.base.mutate_counts(counts, t, rng, partition=self.partition)


def stage_kernel(family: AnnealedFamily, v: int, step_size: Optional[float] = None):
    """The default base kernel targeting stage v of a family.

    v = 0 is allowed (tempering baselines keep a chain at the initial
    stage); the engine itself only mutates at v >= 1.
    """
    if not 0 <= v <= family.n_stages:
        raise ValueError(f"stage v must be in 0..{family.n_stages}")
    beta = family.betas[v]
    if family.kind == "real":
        std = (
            float(step_size)
            if step_size is not None
            else math.sqrt(default_step_variance(family.sigma, beta, family.dimension))
        )
        return RandomWalkMetropolis(
            lambda x: beta * family.log_q(x), std, family.dimension
        )
    if family.kind == "spin":
        return SingleSiteFlip(lambda x: beta * family.log_q(x), family.dimension)
    if family.kind == "index":
        return DiscreteNeighborWalk(beta * family.index_log_mass)
    raise ValueError(f"no default kernel for state kind {family.kind!r}")


# ---------------------------------------------------------------------------
# Exact transition matrices (small enumerated spaces only).

MAX_MATRIX_STATES = 10_000


def restrict_transition_matrix(P: np.ndarray, labels) -> np.ndarray:
    """Apply the cell restriction to an exact transition matrix.

    Cross-cell mass in each row is moved onto the diagonal; the result is
    block diagonal over cells and row stochastic.
    """
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    R = np.where(same, P, 0.0)
    np.fill_diagonal(R, np.diag(R) + (P * ~same).sum(axis=1))
    return R


def cell_submatrix(P: np.ndarray, labels, j: int) -> np.ndarray:
    """The rows/columns of cell j from a (restricted) matrix."""
    idx = np.flatnonzero(np.asarray(labels) == j)
    return P[np.ix_(idx, idx)]


def spin_flip_transition_matrix(log_density_vector: np.ndarray, d: int) -> np.ndarray:
    """Exact matrix of the single-site flip kernel on enumerated spins.

    States are ordered as in ``discrete.enumerate_spins``: flipping site k
    toggles bit k of the state index.
    """
    lm = np.asarray(log_density_vector, dtype=float)
    m = lm.size
    if m != 2**d:
        raise ValueError("log density vector must cover all 2**d spin states")
    P = np.zeros((m, m))
    idx = np.arange(m)
    for k in range(d):
        j = idx ^ (1 << k)
        P[idx, j] = np.minimum(1.0, np.exp(lm[j] - lm[idx])) / d
    P[idx, idx] = 1.0 - P.sum(axis=1)
    return P


def transition_matrix(kernel, n_states: Optional[int] = None) -> np.ndarray:
    """Exact row-stochastic matrix of a discrete-capable kernel."""
    if isinstance(kernel, RestrictedKernel):
        P = transition_matrix(kernel.base, n_states=n_states)
        labels = kernel.partition.classify(np.arange(P.shape[0]))
        return restrict_transition_matrix(P, labels)
    if isinstance(kernel, DiscreteNeighborWalk):
        if kernel.n_states > MAX_MATRIX_STATES:
            raise ValueError(f"space too large: {kernel.n_states}")
        return kernel.transition_matrix()
    if isinstance(kernel, SingleSiteFlip):
        if 2**kernel.dim > MAX_MATRIX_STATES:
            raise ValueError(f"spin space too large: 2**{kernel.dim}")
        from .discrete import enumerate_spins

        lm = np.asarray(kernel.log_density(enumerate_spins(kernel.dim)), dtype=float)
        return spin_flip_transition_matrix(lm, kernel.dim)
    if isinstance(kernel, IdentityKernel):
        if n_states is None:
            raise ValueError("identity kernel needs an explicit state count")
        return np.eye(n_states)
    raise TypeError(f"no exact transition matrix for {type(kernel).__name__}")


# ---------------------------------------------------------------------------
# Spectral quantities of reversible chains.


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Stationary vector of a row-stochastic matrix via a linear solve."""
    P = np.asarray(P, dtype=float)
    m = P.shape[0]
    A = np.vstack([P.T - np.eye(m), np.ones(m)])
    b = np.zeros(m + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return pi


def spectral_gap(P: np.ndarray, stationary: Optional[np.ndarray] = None) -> float:
    """Absolute spectral gap 1 - max(|lambda_2|, |lambda_min|).

    The chain must be reversible; the spectrum is taken from the
    symmetrized similarity transform D^{1/2} P D^{-1/2}.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(P < -1e-12):
        raise ValueError("transition matrix has negative entries")
    if np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-9:
        raise ValueError("rows must sum to 1")
    if P.shape[0] == 1:
        return 1.0
    pi = stationary_distribution(P) if stationary is None else np.asarray(stationary)
    if np.any(pi <= 0):
        raise ValueError("stationary vector must be strictly positive")
    flux = pi[:, None] * P
    if np.max(np.abs(flux - flux.T)) > 1e-8:
        raise ValueError("kernel is not reversible for its stationary vector")
    root = np.sqrt(pi)
    S = (root[:, None] / root[None, :]) * P
    eigs = np.linalg.eigvalsh((S + S.T) / 2.0)
    if abs(eigs[-1] - 1.0) > 1e-10:
        raise ValueError("leading eigenvalue is not 1; input is not stochastic")
    # a repeated unit eigenvalue (reducible chain, identity) has zero gap
    return float(max(0.0, 1.0 - max(abs(eigs[-2]), abs(eigs[0]))))


def mixing_time_bound(gap: float, epsilon: float, M: float) -> int:
    """Warm-start mixing-time bound ceil[(log(2/eps) + log(M-1)) / gap].

    Clamps to 1 when the logarithms go nonpositive (an already-stationary
    start). gap = 0 is an error: the bound is infinite.
    """
    if not 0.0 < gap <= 1.0:
        raise ValueError(f"gap must be in (0, 1], got {gap}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    if M < 1.0:
        raise ValueError(f"warm-start constant must be >= 1, got {M}")
    log_m = math.log(M - 1.0) if M > 1.0 else -math.inf
    val = (math.log(2.0 / epsilon) + log_m) / gap
    if not math.isfinite(val):
        return 1
    return max(1, math.ceil(val))
