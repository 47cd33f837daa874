"""
Extended multivariate von Mises (EMvM) family on the n-torus.

Density f(θ) ∝ exp(η · T(θ)) with sufficient statistics
    cos θ_i, sin θ_i                                   (first order)
    cos θ_i cos θ_j, sin θ_i sin θ_j,
    cos θ_i sin θ_j, sin θ_i cos θ_j   for i < j       (pairwise)
giving p = 2n + 2n(n-1) natural parameters. All-zero parameters are the
uniform distribution.

Sampling is Gibbs: every full conditional is a one-dimensional von Mises.
Fitting maximises the weighted pseudo-likelihood of the batch (a ridge term
keeps it bounded for concentrated elites) and then damps the step so that the
sampled KL divergence from the previous distribution stays within budget.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy import optimize, special

import config

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
SAMPLE_RATIO = 0.07
BATCH_MULTIPLE = 16


def parameter_count(dim: int) -> int:
    return 2 * dim + 2 * dim * (dim - 1)


def _pairs(dim: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(dim, k=1)


@dataclass(frozen=True)
class EMvMParams:
    """Natural parameters laid out as [a | b | c | d | e | g]; a, b have one
    entry per coordinate, c, d, e, g one per pair (i < j) in row-major order."""

    dim: int
    coefficients: np.ndarray

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=float).reshape(-1)
        if coefficients.shape[0] != parameter_count(self.dim):
            raise ValueError(
                f"EMvM of dimension {self.dim} needs {parameter_count(self.dim)} "
                f"coefficients, got {coefficients.shape[0]}")
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def size(self) -> int:
        return self.coefficients.shape[0]

    def _block(self, k: int) -> np.ndarray:
        n = self.dim
        pairs = n * (n - 1) // 2
        start = 2 * n + k * pairs
        return self.coefficients[start:start + pairs]

    @property
    def a(self) -> np.ndarray:
        return self.coefficients[:self.dim]

    @property
    def b(self) -> np.ndarray:
        return self.coefficients[self.dim:2 * self.dim]

    @property
    def c(self) -> np.ndarray:
        return self._block(0)

    @property
    def d(self) -> np.ndarray:
        return self._block(1)

    @property
    def e(self) -> np.ndarray:
        return self._block(2)

    @property
    def g(self) -> np.ndarray:
        return self._block(3)

    def coupling(self):
        """Coupling matrices (CC, SS, CS).

        CC[i, j] multiplies cos θ_i cos θ_j, SS[i, j] sin θ_i sin θ_j, and
        CS[i, j] cos θ_i sin θ_j; CC and SS are symmetric, diagonals zero.
        """
        n = self.dim
        iu, ju = _pairs(n)
        cc = np.zeros((n, n))
        ss = np.zeros((n, n))
        cs = np.zeros((n, n))
        cc[iu, ju] = cc[ju, iu] = self.c
        ss[iu, ju] = ss[ju, iu] = self.d
        cs[iu, ju] = self.e
        cs[ju, iu] = self.g
        return cc, ss, cs

    def conditional(self, thetas: np.ndarray, i: int, coupling=None):
        """Location and concentration of θ_i given the other coordinates.

        `coupling` reuses matrices from coupling() across calls.
        """
        cc, ss, cs = coupling or self.coupling()
        cos_t, sin_t = np.cos(thetas), np.sin(thetas)
        big_a = self.a[i] + cos_t @ cc[i] + sin_t @ cs[i]
        big_b = self.b[i] + sin_t @ ss[i] + cos_t @ cs[:, i]
        return np.arctan2(big_b, big_a), np.hypot(big_a, big_b)


@dataclass(frozen=True)
class SampleBatch:
    points: np.ndarray
    weights: np.ndarray
    seed_trace: tuple = field(default=())

    def __post_init__(self):
        points = np.mod(np.atleast_2d(np.asarray(self.points, dtype=float)), TWO_PI)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if weights.shape[0] != points.shape[0]:
            raise ValueError(f"{points.shape[0]} points but {weights.shape[0]} weights")
        if np.any(weights < 0):
            raise ValueError("Sample weights must be non-negative")
        total = weights.sum()
        if not total > 0:
            raise ValueError("Sample weights sum to zero")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights / total)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def reweighted(self, weights) -> "SampleBatch":
        return SampleBatch(self.points, weights, self.seed_trace)


def uniform_params(dim: int) -> EMvMParams:
    if dim < 1:
        raise ValueError(f"Torus dimension must be at least 1, got {dim}")
    return EMvMParams(dim, np.zeros(parameter_count(dim)))


def batch_size(p: int) -> int:
    """Smallest N with p/N below the sample ratio, rounded up to a multiple of 16."""
    if p < 2:
        raise ValueError(f"Parameter count must be at least 2, got {p}")
    n = int(math.floor(p / SAMPLE_RATIO)) + 1
    while p / n >= SAMPLE_RATIO:
        n += 1
    return int(math.ceil(n / BATCH_MULTIPLE) * BATCH_MULTIPLE)


def sufficient_statistics(thetas) -> np.ndarray:
    """T(θ) for each row: (K, p)."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    iu, ju = _pairs(thetas.shape[1])
    return np.hstack((cos_t, sin_t,
                      cos_t[:, iu] * cos_t[:, ju],
                      sin_t[:, iu] * sin_t[:, ju],
                      cos_t[:, iu] * sin_t[:, ju],
                      sin_t[:, iu] * cos_t[:, ju]))


def _seed_trace(seed) -> tuple:
    if isinstance(seed, np.random.SeedSequence):
        return (seed.entropy,) + tuple(seed.spawn_key)
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    if isinstance(seed, (tuple, list)):
        return tuple(int(s) for s in seed)
    return ()


def gibbs_sample(params: EMvMParams, count: int, burn_in: int = config.GIBBS_BURN_IN,
                 seed=0) -> SampleBatch:
    """
    Draw `count` points with independent Gibbs chains, one draw per chain.

    Chains start uniform, run `burn_in` full sweeps, and the next sweep gives
    the sample. Each conditional θ_i | θ_-i is von Mises(μ_i, κ_i) and is drawn
    with numpy's Best–Fisher sampler, vectorised across chains.

    Args:
        params: Distribution
        count: Number of chains / samples
        burn_in: Sweeps discarded per chain
        seed: int, sequence of ints, SeedSequence or Generator

    Returns:
        SampleBatch with uniform weights
    """
    if count < 1:
        raise ValueError(f"Sample count must be positive, got {count}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = params.dim
    coupling = params.coupling()
    thetas = rng.uniform(0.0, TWO_PI, size=(count, n))
    coupled = any(np.any(m) for m in coupling)
    sweeps = burn_in + 1 if coupled else 1
    for _ in range(sweeps):
        for i in range(n):
            mu, kappa = params.conditional(thetas, i, coupling)
            thetas[:, i] = np.mod(rng.vonmises(mu, kappa), TWO_PI)
    return SampleBatch(thetas, np.full(count, 1.0 / count), _seed_trace(seed))


def concentration(batch: SampleBatch) -> np.ndarray:
    """Weighted mean resultant length of every coordinate."""
    if len(batch) == 0:
        raise ValueError("Concentration of an empty batch is undefined")
    w = batch.weights[:, None]
    c = (w * np.cos(batch.points)).sum(axis=0)
    s = (w * np.sin(batch.points)).sum(axis=0)
    return np.clip(np.hypot(c, s), 0.0, 1.0)


def kl_estimate(new: EMvMParams, old: EMvMParams, batch: SampleBatch) -> float:
    """
    Sampled KL(old ‖ new) from points drawn from `old`.

    KL = E_old[(η_old - η_new)·T] + log Z_new - log Z_old, where the
    log-partition ratio is the importance estimate log E_old[exp((η_new - η_old)·T)].
    The fitting weights of the batch are not used.
    """
    delta = new.coefficients - old.coefficients
    if not np.any(delta):
        return 0.0
    s = sufficient_statistics(batch.points) @ delta
    value = special.logsumexp(s) - math.log(s.shape[0]) - s.mean()
    return max(0.0, float(value))


def _design(thetas: np.ndarray, p: int):
    """Linear maps from η to the conditional natural parameters.

    Returns (phi_a, phi_b) of shape (K, n, p) with A_ki = phi_a[k, i] · η and
    B_ki = phi_b[k, i] · η.
    """
    k, n = thetas.shape
    pairs = n * (n - 1) // 2
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    phi_a = np.zeros((k, n, p))
    phi_b = np.zeros((k, n, p))
    idx = np.arange(n)
    phi_a[:, idx, idx] = 1.0
    phi_b[:, idx, n + idx] = 1.0
    iu, ju = _pairs(n)
    q = np.arange(pairs)
    c_at, d_at, e_at, g_at = (2 * n + block * pairs + q for block in range(4))
    # coordinate i of pair (i, j)
    phi_a[:, iu, c_at] = cos_t[:, ju]
    phi_b[:, iu, d_at] = sin_t[:, ju]
    phi_a[:, iu, e_at] = sin_t[:, ju]
    phi_b[:, iu, g_at] = cos_t[:, ju]
    # coordinate j of pair (i, j)
    phi_a[:, ju, c_at] = cos_t[:, iu]
    phi_b[:, ju, d_at] = sin_t[:, iu]
    phi_b[:, ju, e_at] = cos_t[:, iu]
    phi_a[:, ju, g_at] = sin_t[:, iu]
    return phi_a, phi_b


def _negative_pseudo_loglik(eta, phi_a, phi_b, cos_t, sin_t, weights, anchor, ridge):
    big_a = phi_a @ eta
    big_b = phi_b @ eta
    kappa = np.hypot(big_a, big_b)
    log_i0 = np.log(special.i0e(kappa)) + kappa
    ll = (weights[:, None] * (big_a * cos_t + big_b * sin_t - log_i0)).sum()
    # E[cos], E[sin] of a von Mises: A·I1/(κ I0), B·I1/(κ I0); limit 1/2 at κ = 0
    safe = np.where(kappa > 1e-8, kappa, 1.0)
    ratio = np.where(kappa > 1e-8, special.i1e(safe) / (special.i0e(safe) * safe), 0.5)
    resid_a = weights[:, None] * (cos_t - ratio * big_a)
    resid_b = weights[:, None] * (sin_t - ratio * big_b)
    grad = (np.einsum("ki,kip->p", resid_a, phi_a) + np.einsum("ki,kip->p", resid_b, phi_b))
    diff = eta - anchor
    value = -ll + 0.5 * ridge * diff @ diff
    return value, -grad + ridge * diff


@dataclass(frozen=True)
class FitResult:
    params: EMvMParams
    alpha: float
    kl: float
    degenerate: bool = False


def fit_weighted(batch: SampleBatch, prev: EMvMParams, kl_budget: float,
                 ridge: float = 1e-4, max_steps: int = 200) -> FitResult:
    """
    Move the distribution toward the weighted batch inside a KL trust region.

    The target is the maximiser of the weighted pseudo-likelihood plus a ridge
    toward `prev`; the step prev + α(target - prev) uses the largest α in
    (0, 1] whose sampled KL(prev ‖ new) is within `kl_budget`.

    Args:
        batch: Points (drawn from prev) with fitting weights
        prev: Current distribution
        kl_budget: Trust-region radius
        ridge: L2 weight toward prev
        max_steps: L-BFGS iteration cap

    Returns:
        FitResult; degenerate=True and prev unchanged when the batch has fewer
        than two distinct points
    """
    if kl_budget <= 0:
        raise ValueError(f"KL budget must be positive, got {kl_budget}")
    if batch.dim != prev.dim:
        raise ValueError(f"Batch dimension {batch.dim} does not match parameters {prev.dim}")
    if np.unique(np.round(batch.points, 12), axis=0).shape[0] < 2:
        logger.warning("EMvM: degenerate batch (fewer than 2 distinct points), keeping parameters")
        return FitResult(prev, 0.0, 0.0, True)

    active = batch.weights > 0
    thetas = batch.points[active]
    weights = batch.weights[active]
    phi_a, phi_b = _design(thetas, prev.size)
    anchor = prev.coefficients
    result = optimize.minimize(
        _negative_pseudo_loglik, anchor.copy(), jac=True, method="L-BFGS-B",
        args=(phi_a, phi_b, np.cos(thetas), np.sin(thetas), weights, anchor, ridge),
        options={"maxiter": max_steps})
    step = result.x - anchor

    def propose(alpha: float) -> EMvMParams:
        return EMvMParams(prev.dim, anchor + alpha * step)

    def excess(alpha: float) -> float:
        return kl_estimate(propose(alpha), prev, batch) - kl_budget

    alpha = 1.0
    if excess(1.0) > 0:
        # sampled KL is convex in alpha and zero at alpha = 0
        alpha = optimize.brentq(excess, 0.0, 1.0, xtol=1e-10)
        while alpha > 0 and excess(alpha) > 0:
            alpha *= 0.999
    new = propose(alpha)
    return FitResult(new, float(alpha), kl_estimate(new, prev, batch))
