"""
ETRPA search loop.

Each iteration draws a batch from the current EMvM on the DOF torus, decodes
and evaluates every point, ranks the batch (feasible by density, then
infeasible by violation), and moves the EMvM toward the weighted elites
inside a KL trust region. After the main run, `refine` repeats the search in
shrinking boxes around the incumbent.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import config
from emvm import batch_size, concentration, fit_weighted, gibbs_sample, uniform_params
from geometry import Shape
from packing import Configuration, PackingReport, contact_tolerance, evaluate_batch, verify
from symmetry import DofLayout, PlaneGroupSpec, decode_batch, dof_layout

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["round", "iteration", "best_density", "mean_violation",
                 "min_concentration", "alpha", "kl_budget"]
RANK_TIE = 5e-4


class NoFeasibleConfigurationError(RuntimeError):
    """Raised when a search never sampled a feasible configuration."""


@dataclass(frozen=True)
class SearchSettings:
    max_iterations: int = 8000
    kl_budget: float = config.KL_BUDGET
    elite_fraction: float = config.ELITE_FRACTION
    refine_rounds: int = 30
    refine_shrink: float = 0.75
    epsilon0: float = 0.1
    seed: int = config.DEFAULT_SEED
    neighbor_block: int = config.NEIGHBOR_BLOCK
    refine_max_iterations: int = 8000
    lengths: Optional[Tuple[float, float]] = None
    gamma: Optional[Tuple[float, float]] = None
    batch: Optional[int] = None
    stagnation_stop: int = config.STAGNATION_STOP
    log_every: int = 100

    def __post_init__(self):
        for name in ("max_iterations", "refine_max_iterations", "neighbor_block",
                     "stagnation_stop", "log_every"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.refine_rounds < 0:
            raise ValueError(f"refine_rounds must be non-negative, got {self.refine_rounds}")
        if self.neighbor_block % 2 == 0:
            raise ValueError(f"neighbor_block must be odd, got {self.neighbor_block}")
        if not self.kl_budget > 0:
            raise ValueError(f"kl_budget must be positive, got {self.kl_budget}")
        if not 0 < self.elite_fraction <= 1:
            raise ValueError(f"elite_fraction must lie in (0, 1], got {self.elite_fraction}")
        if not 0 < self.refine_shrink < 1:
            raise ValueError(f"refine_shrink must lie in (0, 1), got {self.refine_shrink}")
        if not 0 < self.epsilon0 <= 0.5:
            raise ValueError(f"epsilon0 must lie in (0, 0.5], got {self.epsilon0}")
        if self.batch is not None and self.batch < 2:
            raise ValueError(f"batch must be at least 2, got {self.batch}")

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "SearchSettings":
        """Preset values with per-field overrides; None overrides are ignored."""
        values = config.preset(name)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class SearchResult:
    best: Configuration
    report: PackingReport
    trace: pd.DataFrame
    iterations_used: int
    converged: bool
    layout: Optional[DofLayout] = None
    settings: Optional[SearchSettings] = None

    def to_dict(self) -> dict:
        return {
            "certificate": self.best.to_certificate(),
            "report": self.report.to_dict(),
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "settings": asdict(self.settings) if self.settings else None,
        }


def _dof_vectors(a, b, gamma, centroid, rotation) -> np.ndarray:
    return np.column_stack((a, b, gamma, centroid[:, 0], centroid[:, 1], rotation))


def _order(densities, violations, feasible, dofs) -> np.ndarray:
    score = np.where(feasible, -densities, violations)
    keys = tuple(dofs[:, k] for k in range(dofs.shape[1] - 1, -1, -1)) + (score, ~feasible)
    return np.lexsort(keys)


def rank_batch(evals: Sequence[Tuple[Configuration, PackingReport]]) -> list:
    """
    Order evaluated candidates best first.

    Feasible candidates come first by density (descending), then infeasible
    ones by violation (ascending); ties fall back to the lexicographic DOF
    vector (a, b, gamma, frac_x, frac_y, rotation).

    Args:
        evals: (configuration, report) pairs

    Returns:
        Indices into `evals`
    """
    if len(evals) == 0:
        raise ValueError("Cannot rank an empty batch")
    densities = np.array([r.density for _, r in evals], dtype=float)
    violations = np.array([r.violation for _, r in evals], dtype=float)
    feasible = np.array([r.feasible for _, r in evals], dtype=bool)
    dofs = np.array([(c.cell.a, c.cell.b, c.cell.gamma, c.centroid[0], c.centroid[1],
                      c.motif_rotation) for c, _ in evals], dtype=float)
    return [int(i) for i in _order(densities, violations, feasible, dofs)]


def elite_weights(size: int, fraction: float) -> Tuple[int, np.ndarray]:
    """Linearly decreasing rank weights for the top ceil(fraction·size) samples."""
    count = max(1, int(math.ceil(fraction * size)))
    weights = np.arange(count, 0, -1, dtype=float)
    return count, weights / weights.sum()


def _run(layout: DofLayout, settings: SearchSettings, stream: int, max_iterations: int,
         incumbent: Optional[Tuple[Configuration, float]] = None):
    """One ETRPA run on `layout`; returns (best, best_density, trace rows, iterations, converged)."""
    group, shape = layout.group, layout.shape
    params = uniform_params(layout.count)
    size = settings.batch or batch_size(params.size)
    count, weights = elite_weights(size, settings.elite_fraction)
    tau = contact_tolerance(shape)
    kl_budget = settings.kl_budget

    best, best_density = incumbent if incumbent else (None, -math.inf)
    rows = []
    stagnant = 0
    converged = False
    iteration = 0
    for iteration in range(1, max_iterations + 1):
        rng = np.random.default_rng(np.random.SeedSequence([settings.seed, stream, iteration]))
        batch = gibbs_sample(params, size, seed=rng)
        poses = decode_batch(batch.points, layout)
        densities, violations = evaluate_batch(group, shape, poses, settings.neighbor_block)
        feasible = violations <= tau
        order = _order(densities, violations, feasible,
                       _dof_vectors(poses.a, poses.b, poses.gamma, poses.centroid, poses.rotation))

        top = order[0]
        improved = bool(feasible[top] and densities[top] > best_density)
        if improved:
            best = Configuration.from_batch(group, shape, poses, int(top))
            best_density = float(densities[top])

        fit_w = np.zeros(size)
        fit_w[order[:count]] = weights
        fit = fit_weighted(batch.reweighted(fit_w), params, kl_budget)
        params = fit.params
        spread = float(concentration(batch).min())
        rows.append((stream, iteration, best_density if best is not None else math.nan,
                     float(violations.mean()), spread, fit.alpha, kl_budget))

        stagnant = 0 if improved else stagnant + 1
        if stagnant and stagnant % config.KL_STAGNATION == 0 and kl_budget > config.KL_BUDGET_FLOOR:
            kl_budget = max(config.KL_BUDGET_FLOOR, kl_budget / 2.0)
            logger.info(f"ETRPA: no improvement for {stagnant} iterations, KL budget now {kl_budget:.4g}")
        if iteration % settings.log_every == 0:
            logger.info(f"ETRPA: {group.name} round {stream} iteration {iteration} "
                        f"best density {best_density:.5f} min concentration {spread:.4f}")
        if spread >= config.POINT_CONCENTRATION:
            converged = True
            break
        if stagnant >= settings.stagnation_stop:
            break
    return best, best_density, rows, iteration, converged


def _result(best, rows, iterations, converged, layout, settings, shape, group) -> SearchResult:
    if best is None:
        raise NoFeasibleConfigurationError(
            f"No feasible configuration found for {group.name} with "
            f"{'disc' if shape.is_disc else f'{shape.n}-gon'} in {iterations} iterations")
    report = verify(best, block=settings.neighbor_block)
    if not report.feasible:
        raise NoFeasibleConfigurationError(
            f"Best configuration for {group.name} failed verification "
            f"(violation {report.violation:.3g})")
    trace = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    return SearchResult(best, report, trace, iterations, converged, layout, settings)


def etrpa_search(shape: Shape, group: PlaneGroupSpec, settings: SearchSettings) -> SearchResult:
    """
    Search the densest single-orbit packing of `shape` under `group`.

    Args:
        shape: Motif template (its circumradius sets the scale)
        group: Plane group
        settings: Search settings

    Returns:
        SearchResult holding the best feasible configuration ever sampled

    Raises:
        NoFeasibleConfigurationError: if no sample was ever feasible
    """
    layout = dof_layout(group, shape, shape.circumradius, lengths=settings.lengths,
                        gamma=settings.gamma)
    logger.info(f"ETRPA: searching {group.name} with {layout.count} DOF, "
                f"batch {settings.batch or batch_size(uniform_params(layout.count).size)}")
    best, _, rows, iterations, converged = _run(layout, settings, 0, settings.max_iterations)
    return _result(best, rows, iterations, converged, layout, settings, shape, group)


def refine(result: SearchResult, shape: Shape, group: PlaneGroupSpec,
           settings: SearchSettings) -> SearchResult:
    """
    Search shrinking boxes around the incumbent.

    Each round restricts every DOF to a box of half-width ε·range around the
    incumbent. A round that finds a denser feasible configuration recenters
    the box and keeps ε; otherwise ε shrinks by `refine_shrink`. The
    incumbent is carried into every round, so the density never decreases.
    """
    if not result.report.feasible:
        raise ValueError("refine needs a feasible incumbent")
    base = result.layout or dof_layout(group, shape, shape.circumradius,
                                       lengths=settings.lengths, gamma=settings.gamma)
    best, best_density = result.best, result.report.density
    epsilon = settings.epsilon0
    traces = [result.trace]
    iterations = result.iterations_used
    converged = result.converged
    for round_index in range(1, settings.refine_rounds + 1):
        layout = base.restricted(base.values_of(best), epsilon, base)
        found, density, rows, used, round_converged = _run(
            layout, settings, round_index, settings.refine_max_iterations, (best, best_density))
        iterations += used
        converged = round_converged
        traces.append(pd.DataFrame(rows, columns=TRACE_COLUMNS))
        if density > best_density:
            logger.info(f"Refine: round {round_index} improved {best_density:.6f} -> {density:.6f}, "
                        f"recentering at epsilon {epsilon:.3g}")
            best, best_density = found, density
        else:
            epsilon *= settings.refine_shrink
    trace = pd.concat(traces, ignore_index=True)
    report = verify(best, block=settings.neighbor_block)
    return SearchResult(best, report, trace, iterations, converged, base, settings)


def run_search(shape: Shape, group: PlaneGroupSpec, settings: SearchSettings) -> SearchResult:
    """Coarse search followed by refinement when refine_rounds > 0."""
    result = etrpa_search(shape, group, settings)
    if settings.refine_rounds > 0:
        result = refine(result, shape, group, settings)
    logger.info(f"ETRPA: {group.name} finished at density {result.report.density:.6f} "
                f"after {result.iterations_used} iterations")
    return result


def _density_of(value) -> float:
    if isinstance(value, SearchResult):
        return value.report.density
    if isinstance(value, PackingReport):
        return value.density
    return float(value)


def rank_table(results: Mapping[Tuple[str, object], object], n_values: Sequence,
               groups: Optional[Sequence[str]] = None, tie: float = RANK_TIE) -> pd.DataFrame:
    """
    Per-n ranking of plane groups by density.

    A new rank starts when a density falls more than `tie` below the first
    density of the current rank, so groups equal at table precision share it.
    A NaN density marks a failed search: it is listed last without a rank.

    Args:
        results: (group name, n) -> SearchResult, PackingReport or density
        n_values: Shapes to rank (ints, or "disc")
        groups: Groups expected for every n; defaults to the groups present

    Returns:
        DataFrame with columns n, group, density, rank

    Raises:
        ValueError: listing every missing (group, n) cell
    """
    groups = list(groups) if groups is not None else sorted({g for g, _ in results})
    missing = [(g, n) for n in n_values for g in groups if (g, n) not in results]
    if missing:
        raise ValueError("Missing results for: " + ", ".join(f"{g} n={n}" for g, n in missing))

    records = []
    for n in n_values:
        values = [(_density_of(results[(g, n)]), g) for g in groups]
        cells = sorted(((v, g) for v, g in values if not math.isnan(v)), key=lambda item: (-item[0], item[1]))
        rank, leader = 0, None
        for value, name in cells:
            if leader is None or leader - value > tie:
                rank += 1
                leader = value
            records.append({"n": n, "group": name, "density": value, "rank": rank})
        for name in sorted(g for v, g in values if math.isnan(v)):
            records.append({"n": n, "group": name, "density": math.nan, "rank": None})
    return pd.DataFrame.from_records(records, columns=["n", "group", "density", "rank"])
