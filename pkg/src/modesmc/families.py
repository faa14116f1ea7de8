"""State spaces, annealed target families, partitions, and closed forms.

States are always handled in batches: a batch of real vectors or spin
vectors is an (n, d) array, a batch of enumerated-space states is an (n,)
integer array of state indices. All densities are unnormalized and live in
log space.

An annealed family bridges an exactly-samplable distribution at inverse
temperature ``betas[0]`` to the target at ``betas[-1] == 1`` via
``mu_v(x) propto q(x)**betas[v]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr
from scipy.stats import truncnorm


class InvalidStateError(ValueError):
    """A state outside the family's support (non-finite log density)."""


@dataclass(frozen=True)
class Partition:
    """Total deterministic classifier of states into cells 0..n_cells-1."""

    n_cells: int
    classify: Callable[[np.ndarray], np.ndarray]
    name: str = "partition"

    def occupancy(self, cells: np.ndarray) -> np.ndarray:
        """Per-cell counts for a batch of cell labels."""
        return np.bincount(cells, minlength=self.n_cells)


@dataclass(frozen=True)
class AnnealedFamily:
    """A tempered sequence mu_v propto q**beta_v with an exact mu_0 sampler.

    Parameters
    ----------
    log_q : callable
        Batched unnormalized log density of the base target (beta = 1).
    betas : tuple of float
        Strictly increasing inverse temperatures ending at exactly 1.
        ``betas[0] == 0`` (a uniform initial stage) is allowed only for
        finite state spaces (spin or index kinds).
    dimension : int
        State dimension d (1 for enumerated index spaces).
    kind : str
        "real" | "spin" | "index"; decides kernel and engine dispatch.
    sample_initial : callable
        (n, rng) -> exact i.i.d. batch from mu_0.
    sample_stage : callable, optional
        (v, n, rng) -> exact i.i.d. batch from mu_v, where available.
    index_log_mass : ndarray, optional
        For index families, the base log masses over the enumerated states.
    sigma : float
        Scale hint for random-walk proposal sizing.
    """

    log_q: Callable[[np.ndarray], np.ndarray]
    betas: tuple
    dimension: int
    kind: str
    sample_initial: Callable[[int, np.random.Generator], np.ndarray]
    name: str = "family"
    sample_stage: Optional[Callable] = None
    index_log_mass: Optional[np.ndarray] = None
    sigma: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        betas = tuple(float(b) for b in self.betas)
        object.__setattr__(self, "betas", betas)
        if len(betas) < 1:
            raise ValueError("betas must be nonempty")
        if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError(f"betas must be strictly increasing: {betas}")
        if betas[-1] != 1.0:
            raise ValueError(f"final beta must be exactly 1, got {betas[-1]}")
        if betas[0] < 0.0:
            raise ValueError(f"beta_0 must be nonnegative, got {betas[0]}")
        if betas[0] == 0.0 and self.kind == "real":
            raise ValueError("beta_0 = 0 is improper on unbounded spaces")
        if self.kind not in ("real", "spin", "index"):
            raise ValueError(f"unknown state kind {self.kind!r}")

    @property
    def n_stages(self) -> int:
        """V, the number of reweight/mutate stages after initialization."""
        return len(self.betas) - 1

    def stage_log_density(self, v: int, x: np.ndarray) -> np.ndarray:
        """log of the stage-v unnormalized density, beta_v * log q."""
        return self.betas[v] * self.log_q(x)

    def log_weight(self, v: int, x: np.ndarray) -> np.ndarray:
        """Log importance weight into stage v: (beta_v - beta_{v-1}) log q(x).

        Raises InvalidStateError when log q is not finite on some state.
        """
        if not 1 <= v <= self.n_stages:
            raise ValueError(f"stage v must be in 1..{self.n_stages}, got {v}")
        lq = np.asarray(self.log_q(x), dtype=float)
        if not np.all(np.isfinite(lq)):
            raise InvalidStateError("non-finite base log density in batch")
        return (self.betas[v] - self.betas[v - 1]) * lq


def geometric_schedule(d: int) -> tuple:
    """Multiplicative inverse-temperature ladder from 1/d up to 1.

    Entries (1/d)(1 + 1/d)**v for v = 0..ceil(d log d)-1, capped with a
    final entry of exactly 1. Intermediate entries that already reach 1
    are dropped so the ladder stays strictly increasing.
    """
    if d < 2:
        raise ValueError(f"geometric schedule needs d >= 2, got {d}")
    n_inner = math.ceil(d * math.log(d))
    betas = [(1.0 / d) * (1.0 + 1.0 / d) ** v for v in range(n_inner)]
    betas = [b for b in betas if b < 1.0]
    betas.append(1.0)
    return tuple(betas)


def linear_schedule(d: int) -> tuple:
    """Evenly spaced betas v/d for v = 1..d (the conceptual beta_0 is 0)."""
    if d < 1:
        raise ValueError(f"linear schedule needs d >= 1, got {d}")
    return tuple(v / d for v in range(1, d + 1))


def half_space_partition(d: int) -> Partition:
    """Two cells split by the hyperplane sum(x) = 0; ties go to cell 1."""

    def classify(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.where(x.sum(axis=1) > 0.0, 0, 1)

    return Partition(n_cells=2, classify=classify, name=f"half-space(d={d})")


def spin_sign_partition(d: int) -> Partition:
    """Cell 0 where the spin sum is >= 0, cell 1 where it is negative."""

    def classify(x):
        x = np.atleast_2d(np.asarray(x))
        return np.where(x.sum(axis=1) >= 0, 0, 1)

    return Partition(n_cells=2, classify=classify, name=f"spin-sign(d={d})")


def index_partition(labels: np.ndarray) -> Partition:
    """Partition of an enumerated space given per-state cell labels."""
    labels = np.asarray(labels, dtype=np.int64)
    n_cells = int(labels.max()) + 1

    def classify(idx):
        return labels[np.asarray(idx, dtype=np.int64)]

    return Partition(n_cells=n_cells, classify=classify, name="index-labels")


def gaussian_mixture_target(
    d: int, w: float = 0.5, sigma: float = 1.0, nu: float = 1.0, betas=None
) -> tuple:
    """Truncated two-component Gaussian mixture and its half-space partition.

    The base density is q(x) = w exp(-f1) on H plus (1-w) exp(-f2) on the
    complement, with f_j(x) = ||x -+ nu 1_d||^2 / (2 sigma^2) and
    H = {x : sum(x) > 0}. sup q = max(w, 1-w) <= 1, so stage weights never
    exceed 1. Every tempered stage admits exact sampling through the
    one-dimensional projection onto 1_d, which is how both mu_0 and the
    per-stage samplers are implemented.

    The schedule defaults to the multiplicative ladder (d >= 2); pass an
    explicit betas tuple to override it (required for d = 1).
    """
    if not 0.0 < w < 1.0:
        raise ValueError(f"mixture weight must be in (0,1), got {w}")
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    d = int(d)
    betas = geometric_schedule(d) if betas is None else tuple(betas)
    center = nu * np.ones(d)
    inv2s2 = 1.0 / (2.0 * sigma**2)
    logw1, logw2 = math.log(w), math.log(1.0 - w)

    def log_q(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        in_h = x.sum(axis=1) > 0.0
        f1 = ((x - center) ** 2).sum(axis=1) * inv2s2
        f2 = ((x + center) ** 2).sum(axis=1) * inv2s2
        return np.where(in_h, logw1 - f1, logw2 - f2)

    u = np.ones(d) / math.sqrt(d)
    m = nu * math.sqrt(d)

    def sample_stage(v, n, rng):
        beta = betas[v]
        sd = sigma / math.sqrt(beta)
        # tempered component masses differ only through w**beta vs (1-w)**beta
        p_h = w**beta / (w**beta + (1.0 - w) ** beta)
        mirror = rng.random(n) >= p_h
        us = rng.random(n)
        s = truncnorm.ppf(us, a=(0.0 - m) / sd, b=np.inf, loc=m, scale=sd)
        g = rng.standard_normal((n, d)) * sd
        x = s[:, None] * u + (g - np.outer(g @ u, u))
        x[mirror] = -x[mirror]
        return x

    family = AnnealedFamily(
        log_q=log_q,
        betas=betas,
        dimension=d,
        kind="real",
        sample_initial=lambda n, rng: sample_stage(0, n, rng),
        sample_stage=sample_stage,
        name="gaussian-mixture",
        sigma=sigma,
        params={"d": d, "w": w, "sigma": sigma, "nu": nu},
    )
    return family, half_space_partition(d)


def ising_target(d: int, alpha: float) -> tuple:
    """Mean-field spin model exp{alpha/(2d) (sum x_i)^2} and sign partition.

    d must be odd so the spin sum never lands on the cell boundary. The
    schedule is linear with a uniform (beta = 0) initial stage sampled
    exactly.
    """
    d = int(d)
    if d % 2 == 0:
        raise ValueError(f"d must be odd for the sign partition, got {d}")
    betas = (0.0,) + linear_schedule(d)
    coeff = alpha / (2.0 * d)

    def log_q(x):
        x = np.atleast_2d(np.asarray(x))
        s = x.sum(axis=1).astype(float)
        return coeff * s * s

    def sample_initial(n, rng):
        return (rng.integers(0, 2, size=(n, d)) * 2 - 1).astype(np.int8)

    family = AnnealedFamily(
        log_q=log_q,
        betas=betas,
        dimension=d,
        kind="spin",
        sample_initial=sample_initial,
        name="mean-field-ising",
        params={"d": d, "alpha": alpha},
    )
    return family, spin_sign_partition(d)


def index_family(
    base_log_mass: np.ndarray, betas, name: str = "enumerated"
) -> AnnealedFamily:
    """Tempered family over an enumerated space; states are indices."""
    base = np.asarray(base_log_mass, dtype=float)
    if not np.all(np.isfinite(base)):
        raise ValueError("base log masses must be finite")
    betas = tuple(betas)
    b0 = betas[0]

    def log_q(idx):
        return base[np.asarray(idx, dtype=np.int64)]

    def sample_initial(n, rng):
        lm = b0 * base
        p = np.exp(lm - lm.max())
        p /= p.sum()
        return rng.choice(base.size, size=n, p=p)

    return AnnealedFamily(
        log_q=log_q,
        betas=betas,
        dimension=1,
        kind="index",
        sample_initial=sample_initial,
        name=name,
        index_log_mass=base,
    )


# ---------------------------------------------------------------------------
# Closed-form catalogs for the two worked families.


@dataclass(frozen=True)
class GaussianMixtureCatalog:
    """Exact per-stage quantities for the truncated Gaussian mixture.

    All formulas come from the one-dimensional projection onto 1_d: each
    tempered component is a Gaussian with scale sigma/sqrt(beta) whose own
    half-space holds mass Phi(nu sqrt(d beta)/sigma). Note the mixture
    weights temper along with the exponents (w**beta), which is exact for
    mu_v propto q**beta_v; for w = 1/2 this coincides with keeping w fixed.
    """

    d: int
    w: float
    sigma: float
    nu: float
    betas: tuple

    family_tag = "gaussian-mixture"

    @property
    def n_stages(self):
        return len(self.betas) - 1

    def _phi_own_halfspace(self, beta: float) -> float:
        return float(ndtr(self.nu * math.sqrt(self.d * beta) / self.sigma))

    def cell_probability(self, v: int) -> np.ndarray:
        beta = self.betas[v]
        a = self.w**beta
        b = (1.0 - self.w) ** beta
        return np.array([a / (a + b), b / (a + b)])

    def log_z(self, beta: float) -> float:
        """log integral of q**beta over R^d."""
        if beta <= 0:
            raise ValueError("beta must be positive")
        mix = math.log(self.w**beta + (1.0 - self.w) ** beta)
        return (
            mix
            + math.log(self._phi_own_halfspace(beta))
            + 0.5 * self.d * math.log(2.0 * math.pi * self.sigma**2 / beta)
        )

    def z_ratio(self, v: int) -> float:
        """z_{v-1} / z_v along the schedule."""
        if not 1 <= v <= self.n_stages:
            raise ValueError(f"stage v must be in 1..{self.n_stages}")
        return math.exp(self.log_z(self.betas[v - 1]) - self.log_z(self.betas[v]))

    def z_ratio_bound(self, v: int) -> float:
        """The coarse bound 2 (beta_v / beta_{v-1})^{d/2}."""
        return 2.0 * (self.betas[v] / self.betas[v - 1]) ** (self.d / 2.0)

    def cell_mass_table(self) -> np.ndarray:
        return np.stack([self.cell_probability(v) for v in range(len(self.betas))])

    def mu_star(self) -> float:
        return float(self.cell_mass_table().min())

    def w_value(self) -> float:
        """Uniform bound on the stage weights (sup q <= max(w, 1-w) < 1)."""
        return 1.0

    def z_value(self) -> float:
        return max(self.z_ratio(v) for v in range(1, self.n_stages + 1))


@dataclass(frozen=True)
class IsingCatalog:
    """Exact symmetry-driven quantities for the mean-field spin model."""

    d: int
    alpha: float
    betas: tuple

    family_tag = "mean-field-ising"

    @property
    def n_stages(self):
        return len(self.betas) - 1

    def cell_probability(self, v: int) -> np.ndarray:
        # spin-flip symmetry with odd d: both sign cells carry mass 1/2
        return np.array([0.5, 0.5])

    def z_ratio(self, v: int) -> float:
        raise ValueError(
            "no closed-form normalizing constants for the spin model; "
            "enumerate a DiscreteSpace instead"
        )

    def cell_mass_table(self) -> np.ndarray:
        return np.full((len(self.betas), 2), 0.5)

    def mu_star(self) -> float:
        return 0.5

    def w_value(self) -> float:
        # only the product of the density-ratio bounds is known: exp(alpha/2)
        return math.exp(abs(self.alpha) / 2.0)

    def z_value(self) -> float:
        return 1.0


def analytic_catalog(family: AnnealedFamily):
    """Catalog of closed forms for a supported family."""
    if family.name == "gaussian-mixture":
        p = family.params
        return GaussianMixtureCatalog(
            d=p["d"], w=p["w"], sigma=p["sigma"], nu=p["nu"], betas=family.betas
        )
    if family.name == "mean-field-ising":
        p = family.params
        return IsingCatalog(d=p["d"], alpha=p["alpha"], betas=family.betas)
    raise ValueError(f"no analytic catalog for family {family.name!r}")
