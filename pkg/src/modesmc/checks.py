"""Empirical and exact checks of the engine's distributional guarantees.

Small enumerated spaces make every quantity exactly computable, so the
claims behind the engine (the coupling construction, warm mixing times,
local warmness of the resampled marginals, the conditional weight
identity, and the weight concentration bound) can each be verified
directly. The checks here are the library form; the `verify` CLI
subcommand and the acceptance tests drive them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng as rngmod
from .discrete import DiscreteSpace
from .engine import RunConfig, run
from .kernels import (
    cell_submatrix,
    restrict_transition_matrix,
    stage_kernel,
    transition_matrix,
)


def tv_distance(p, q) -> float:
    """Total variation distance between two normalized vectors."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions must share a support")
    for name, vec in (("p", p), ("q", q)):
        if abs(vec.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} is not normalized (sum {vec.sum()})")
    return 0.5 * float(np.abs(p - q).sum())


@dataclass(frozen=True)
class CoupledPair:
    """Draws (primary, shadow) whose marginals are f and g respectively and
    whose disagreement probability is exactly TV(f, g)."""

    primary: np.ndarray
    shadow: np.ndarray
    cell: int

    @property
    def equal(self) -> np.ndarray:
        return self.primary == self.shadow


def coupling_map(f, g, rng, size: int = 1, cell: int = 0) -> CoupledPair:
    """Couple two distributions on one cell by splitting off their overlap.

    With probability a = sum(min(f, g)) both coordinates take one draw from
    the normalized overlap; otherwise the coordinates are drawn
    independently from the normalized residuals, whose supports are
    disjoint. First marginal f, second marginal g, disagreement TV(f, g).
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape:
        raise ValueError("f and g must live on the same cell")
    for name, vec in (("f", f), ("g", g)):
        if np.any(vec < 0) or abs(vec.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} is not a distribution")
    h = np.minimum(f, g)
    a = h.sum()
    u = rng.random(size)
    both = u < a

    x = np.empty(size, dtype=np.int64)
    xbar = np.empty(size, dtype=np.int64)
    n_both = int(both.sum())
    if n_both:
        x[both] = xbar[both] = _categorical(rng, h / a, n_both)
    n_rest = size - n_both
    if n_rest:
        fres = f - h
        gres = g - h
        x[~both] = _categorical(rng, fres / fres.sum(), n_rest)
        xbar[~both] = _categorical(rng, gres / gres.sum(), n_rest)
    return CoupledPair(primary=x, shadow=xbar, cell=cell)


def _categorical(rng, probs, size):
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right")


# ---------------------------------------------------------------------------
# Warm-start mixing times, computed exactly on enumerated cells.

MAX_VERTEX_STATES = 20


def warm_start_vertices(mu, M: float, max_vertices: int = 500_000) -> np.ndarray:
    """All extreme points of {eta : 0 <= eta <= M mu, sum eta = 1}.

    Each vertex saturates eta = M mu on a subset and parks the remaining
    mass on one boundary state. The sup of any convex functional over the
    M-warm polytope is attained on these.
    """
    mu = np.asarray(mu, dtype=float)
    m = mu.size
    if m > MAX_VERTEX_STATES:
        raise ValueError(f"cell too large for vertex enumeration: {m}")
    if M < 1.0:
        raise ValueError("warm-start constant must be >= 1")
    tol = 1e-12
    verts = []
    subset = np.zeros(m, dtype=bool)

    def rec(i, mass):
        if len(verts) > max_vertices:
            raise ValueError("vertex enumeration exceeded the cap")
        if i == m:
            residual = 1.0 - M * mass
            if residual <= tol:
                if residual >= -tol:
                    verts.append(M * mu * subset)
                return
            for y in range(m):
                if not subset[y] and M * mu[y] >= residual - tol:
                    vert = M * mu * subset
                    vert[y] = residual
                    verts.append(vert)
            return
        rec(i + 1, mass)  # skip state i
        if M * (mass + mu[i]) <= 1.0 + tol:
            subset[i] = True
            rec(i + 1, mass + mu[i])
            subset[i] = False

    rec(0, 0.0)
    if not verts:
        raise ValueError("no M-warm starts exist (check mu, M)")
    return np.unique(np.round(np.stack(verts), 15), axis=0)


def warm_mixing_time(
    P_cell: np.ndarray, mu_cell: np.ndarray, M: float, epsilon: float, t_max=100_000
) -> int:
    """Smallest t with sup over M-warm starts of TV(eta P^t, mu) <= eps."""
    P_cell = np.asarray(P_cell, dtype=float)
    mu_cell = np.asarray(mu_cell, dtype=float)
    verts = warm_start_vertices(mu_cell, M)
    dist = verts.copy()
    for t in range(t_max + 1):
        worst = 0.5 * np.abs(dist - mu_cell).sum(axis=1).max()
        if worst <= epsilon:
            return t
        dist = dist @ P_cell
    raise RuntimeError(f"no mixing within {t_max} steps (worst TV {worst:.3g})")


def warm_mixing_times(space: DiscreteSpace, v: int, M: float, epsilon: float) -> list:
    """Exact per-cell warm mixing times of the stage-v restricted kernel."""
    base = stage_kernel(space.to_family(), v)
    P = restrict_transition_matrix(transition_matrix(base), space.labels)
    taus = []
    for j in range(space.n_cells):
        taus.append(
            warm_mixing_time(
                cell_submatrix(P, space.labels, j), space.conditional(v, j), M, epsilon
            )
        )
    return taus


# ---------------------------------------------------------------------------
# Ensemble checks on the engine's resampled marginals.


@dataclass(frozen=True)
class WarmnessStageReport:
    stage: int
    max_ratio: float
    se_at_max: float
    extinction_rate: float
    ok: bool


def local_warmness_report(
    space: DiscreteSpace,
    n_particles: int,
    t: int,
    n_runs: int,
    seed: int,
    warm_limit: float = 7.0,
) -> list:
    """Estimate sup_x resampled-conditional/exact-conditional per stage.

    Runs an ensemble of independent seeded runs, pools the post-resampling
    (pre-mutation) per-state frequencies, and compares every within-cell
    singleton against the exact conditional. On a discrete space the
    supremum over subsets is attained at a singleton. Cells that a run
    never populates are excluded from its mean and surface as the
    extinction rate; a cell no run populates yields ratio = inf.
    """
    family = space.to_family()
    partition = space.to_partition()
    m = space.n_states
    traces = np.empty((n_runs, space.n_stages, m))
    for r in range(n_runs):
        report = run(
            RunConfig(
                family=family,
                partition=partition,
                n_particles=n_particles,
                mutation_steps=t,
                seed=rngmod.substream_seed(seed, r),
                record_resampled=True,
            )
        )
        traces[r] = np.stack(report.resampled_trace)

    rows = []
    for v in range(1, space.n_stages + 1):
        counts = traces[:, v - 1, :]  # (runs, states) after stage-v resampling
        max_ratio, se_at_max = -np.inf, np.nan
        extinct = 0.0
        for j in range(space.n_cells):
            members = space.cell_states(j)
            cell_counts = counts[:, members]
            totals = cell_counts.sum(axis=1)
            alive = totals > 0
            extinct = max(extinct, 1.0 - alive.mean())
            if not alive.any():
                max_ratio, se_at_max = np.inf, np.nan
                continue
            cond = cell_counts[alive] / totals[alive, None]
            exact = space.conditional(v, j)
            ratios = cond.mean(axis=0) / exact
            ses = cond.std(axis=0, ddof=1) / math.sqrt(alive.sum()) / exact
            k = int(np.argmax(ratios))
            if ratios[k] > max_ratio:
                max_ratio, se_at_max = float(ratios[k]), float(ses[k])
        rows.append(
            WarmnessStageReport(
                stage=v,
                max_ratio=max_ratio,
                se_at_max=se_at_max,
                extinction_rate=float(extinct),
                ok=bool(max_ratio < warm_limit),
            )
        )
    return rows


@dataclass(frozen=True)
class IdentityStratumReport:
    cell: int
    stratum: int
    n: int
    observed: float
    predicted: float
    se: float
    ok: Optional[bool]  # None when the stratum was skipped as too thin


def conditional_weight_identity(
    space: DiscreteSpace,
    v: int,
    n_particles: int,
    t: int,
    n_runs: int,
    seed: int,
    n_strata: int = 4,
    min_stratum: int = 30,
) -> list:
    """Check E[w_hat_{v+1}^j | history] = (z_{v+1}/z_v)(mu ratio) p_hat_v^j.

    Replicates are stratified by the observed resampling probability (a
    history-measurable statistic); within each stratum the mean residual
    between the observed next-stage weight sum and the enumerated
    right-hand side must vanish within 3 standard errors. Requires t large
    enough that the mutated within-cell law is near its conditional.
    """
    if not 1 <= v < space.n_stages:
        raise ValueError(f"need 1 <= v < {space.n_stages}")
    family = space.to_family()
    partition = space.to_partition()
    p_hat = np.empty((n_runs, space.n_cells))
    w_next = np.empty((n_runs, space.n_cells))
    for r in range(n_runs):
        report = run(
            RunConfig(
                family=family,
                partition=partition,
                n_particles=n_particles,
                mutation_steps=t,
                seed=rngmod.substream_seed(seed, r),
            )
        )
        p_hat[r] = report.diagnostics[v - 1].resample_probs
        w_next[r] = report.diagnostics[v].cell_weight_sums

    z_ratio = math.exp(space.log_z(v + 1) - space.log_z(v))
    mass_ratio = space.cell_probs(v + 1) / space.cell_probs(v)
    rows = []
    for j in range(space.n_cells):
        predicted = z_ratio * mass_ratio[j] * p_hat[:, j]
        residual = w_next[:, j] - predicted
        edges = np.quantile(p_hat[:, j], np.linspace(0, 1, n_strata + 1))
        strata = np.clip(np.searchsorted(edges, p_hat[:, j], side="right") - 1, 0,
                         n_strata - 1)
        for s in range(n_strata):
            mask = strata == s
            n = int(mask.sum())
            if n < min_stratum:
                rows.append(
                    IdentityStratumReport(j, s, n, np.nan, np.nan, np.nan, None)
                )
                continue
            mean_res = float(residual[mask].mean())
            se = float(residual[mask].std(ddof=1) / math.sqrt(n))
            rows.append(
                IdentityStratumReport(
                    cell=j,
                    stratum=s,
                    n=n,
                    observed=float(w_next[mask, j].mean()),
                    predicted=float(predicted[mask].mean()),
                    se=se,
                    ok=bool(abs(mean_res) <= 3.0 * se),
                )
            )
    return rows


@dataclass(frozen=True)
class ConcentrationReport:
    exceed_rate: float
    bound: float
    binomial_se: float
    n_runs: int
    ok: bool


def stage_weight_concentration(
    space: DiscreteSpace,
    n_particles: int,
    lam: float,
    n_runs: int,
    seed: int,
    value_range: tuple = (0.0, 1.0),
) -> ConcentrationReport:
    """Check P(|f_bar - E[f_bar | F]| > lam) <= 4 exp(-N lam^2 / 2(b-a)^2).

    The statistic is the stage-1 mean weight of N i.i.d. initial particles,
    whose conditional mean is enumerable exactly. The empirical exceedance
    over independent replicates must stay within the bound plus 3 binomial
    standard errors.
    """
    a, b = value_range
    w1 = space.stage_weights(1)
    if w1.min() < a or w1.max() > b:
        raise ValueError(f"stage-1 weights fall outside ({a}, {b})")
    mu0 = space.stage_probs(0)
    exact_mean = float(mu0 @ w1)
    gen = rngmod.stream(seed, 0, rngmod.REPLICATE)
    counts = gen.multinomial(n_particles, mu0, size=n_runs)
    f_bar = counts @ w1 / n_particles
    exceed_rate = float((np.abs(f_bar - exact_mean) > lam).mean())
    bound = min(1.0, 4.0 * math.exp(-n_particles * lam**2 / (2.0 * (b - a) ** 2)))
    se = math.sqrt(bound * (1.0 - bound) / n_runs)
    return ConcentrationReport(
        exceed_rate=exceed_rate,
        bound=bound,
        binomial_se=se,
        n_runs=n_runs,
        ok=bool(exceed_rate <= bound + 3.0 * se),
    )
