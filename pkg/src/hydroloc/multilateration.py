"""Beacon position estimation from anchor TOF measurements.

A real-coded genetic algorithm searches an ENU box for the position that
best explains the measured times of flight from at least four surface
anchors. Because the anchors are coplanar at the surface, the residual
surface is symmetric under reflection through the surface plane; the
search bounds require up <= 0, which makes the underwater solution the
unique feasible one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .propagation import ChannelProfile, pairwise_tof

__all__ = [
    "Anchor",
    "SearchBounds",
    "GaConfig",
    "PositionEstimate",
    "fitness",
    "range_from_tof",
    "ga_localize",
    "evolve_generation",
]

log = logging.getLogger(__name__)

# Residual contribution of a candidate/anchor pair with no direct path:
# large but finite so the search surface stays totally ordered.
NO_PATH_PENALTY = 1e6
# Stop early when the best residual is essentially zero, or when the best
# has not improved for this many generations.
FITNESS_STOP = 1e-12
STAGNATION_LIMIT = 50


@dataclass(frozen=True)
class Anchor:
    """A surface reference point with a (possibly GPS-noisy) ENU position."""

    id: str
    position: tuple[float, float, float]  # ENU, m


@dataclass(frozen=True)
class SearchBounds:
    """Axis-aligned ENU search box; the up range must stay at or below 0."""

    east: tuple[float, float]
    north: tuple[float, float]
    up: tuple[float, float]

    def __post_init__(self) -> None:
        for name, (lo, hi) in (("east", self.east), ("north", self.north), ("up", self.up)):
            if not lo < hi:
                raise ValueError(f"search_bounds.{name} must satisfy lo < hi, got {(lo, hi)}")
        if self.up[1] > 0.0:
            raise ValueError(f"search_bounds.up upper limit must be <= 0, got {self.up[1]}")

    def lows(self) -> np.ndarray:
        return np.array([self.east[0], self.north[0], self.up[0]])

    def highs(self) -> np.ndarray:
        return np.array([self.east[1], self.north[1], self.up[1]])

    def contains(self, point) -> bool:
        p = np.asarray(point, float)
        return bool(np.all(p >= self.lows()) and np.all(p <= self.highs()))

    def largest_extent(self) -> float:
        return float(np.max(self.highs() - self.lows()))


@dataclass(frozen=True)
class GaConfig:
    """Tuning knobs of the genetic solver.

    mutation_sigma_initial defaults to 10% of the largest bounds extent
    and decays geometrically each generation.
    """

    search_bounds: SearchBounds
    population_size: int = 200
    generations: int = 300
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float = 0.3
    mutation_sigma_initial: float | None = None
    # 0.96 anneals the mutation noise fast enough that the stagnation stop
    # does not fire while sigma still dwarfs the remaining error.
    mutation_sigma_decay: float = 0.96
    elite_count: int = 1
    fitness_mode: str = "tof_residual"
    snr_weighting: bool = False
    dispersion_warn_threshold: float = 10.0  # m
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 4:
            raise ValueError(f"population_size must be >= 4, got {self.population_size}")
        if self.generations < 1:
            raise ValueError(f"generations must be >= 1, got {self.generations}")
        if self.tournament_size < 1:
            raise ValueError(f"tournament_size must be >= 1, got {self.tournament_size}")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must be within [0, 1], got {rate}")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError(
                f"elite_count must be within [0, population_size), got {self.elite_count}"
            )
        if self.mutation_sigma_initial is not None and self.mutation_sigma_initial < 0:
            raise ValueError("mutation_sigma_initial must be >= 0")
        if not 0.0 < self.mutation_sigma_decay <= 1.0:
            raise ValueError(
                f"mutation_sigma_decay must be in (0, 1], got {self.mutation_sigma_decay}"
            )
        if self.fitness_mode not in ("tof_residual", "range_residual"):
            raise ValueError(
                f"fitness_mode must be 'tof_residual' or 'range_residual', "
                f"got {self.fitness_mode!r}"
            )

    def initial_sigma(self) -> float:
        if self.mutation_sigma_initial is not None:
            return self.mutation_sigma_initial
        return 0.1 * self.search_bounds.largest_extent()


@dataclass(frozen=True, eq=False)
class PositionEstimate:
    """A solver fix: position plus convergence diagnostics.

    population_dispersion is the RMS distance of the final elite decile
    from the best individual; large values flag degenerate anchor
    geometry. best_fitness is in s^2 (tof_residual) or m^2
    (range_residual).
    """

    position: np.ndarray = field(repr=False)
    best_fitness: float
    population_dispersion: float
    generations_run: int


def _anchor_array(measurements, anchors) -> np.ndarray:
    by_id = {a.id: a for a in anchors}
    rows = []
    for m in measurements:
        if m.anchor_id not in by_id:
            raise ValueError(f"measurement references unknown anchor id {m.anchor_id!r}")
        rows.append(by_id[m.anchor_id].position)
    return np.asarray(rows, float)


def _weights(measurements, snr_weighting: bool) -> np.ndarray:
    if not snr_weighting:
        return np.ones(len(measurements))
    w = np.array([10.0 ** (m.snr / 10.0) for m in measurements])
    return w / w.mean()  # scale-free: mean weight 1


def range_from_tof(
    tof: float,
    profile: ChannelProfile,
    anchor_depth: float,
    assumed_target_depth: float,
) -> float:
    """Convert a TOF to a slant range with the harmonic-mean sound speed.

    The speed is thickness-weighted over the depth interval between the
    anchor and an assumed target depth; a zero-thickness interval uses
    the local layer speed.
    """
    if not tof > 0:
        raise ValueError(f"tof must be > 0, got {tof}")
    for name, depth in (("anchor", anchor_depth), ("target", assumed_target_depth)):
        if not 0.0 <= depth <= profile.total_depth:
            raise ValueError(f"{name} depth {depth} outside water column")

    z_lo, z_hi = sorted((anchor_depth, assumed_target_depth))
    if z_hi == z_lo:
        c = profile.sound_speeds[profile.layer_index_at(z_lo)]
        return tof * c
    boundaries = np.asarray(profile.boundaries)
    speeds = np.asarray(profile.sound_speeds)
    lo = np.maximum(z_lo, boundaries[:-1])
    hi = np.minimum(z_hi, boundaries[1:])
    dz = np.maximum(hi - lo, 0.0)
    harmonic = (z_hi - z_lo) / float((dz / speeds).sum())
    return tof * harmonic


def fitness(
    candidates,
    measurements,
    anchors,
    profile: ChannelProfile,
    mode: str = "tof_residual",
    path_model: str = "refracted",
    snr_weighting: bool = False,
    assumed_target_depth: float | None = None,
):
    """Sum of squared residuals of the candidate(s) against the pings.

    tof_residual compares modelled travel times with measured ones (s^2);
    range_residual first converts each measured TOF to a range using the
    harmonic-mean speed down to assumed_target_depth (default: half the
    column depth) and compares Euclidean distances (m^2). Candidates may
    be a single ENU triple or an (N, 3) array; no-direct-path terms add a
    large finite penalty instead of raising.
    """
    if not measurements:
        raise ValueError("fitness needs at least one measurement")
    cands = np.asarray(candidates, float)
    scalar_in = cands.ndim == 1
    cands = np.atleast_2d(cands)
    depths = -cands[:, 2]
    if np.any(depths < 0.0) or np.any(depths > profile.total_depth):
        raise ValueError("candidate depth outside the water column")

    anchor_pos = _anchor_array(measurements, anchors)
    tof_meas = np.array([m.tof_measured for m in measurements])
    w = _weights(measurements, snr_weighting)

    if mode == "tof_residual":
        tof_model, ok = pairwise_tof(profile, cands, anchor_pos, path_model)
        terms = w * (tof_model - tof_meas) ** 2
        terms = np.where(ok, terms, NO_PATH_PENALTY)
    elif mode == "range_residual":
        if assumed_target_depth is None:
            assumed_target_depth = 0.5 * profile.total_depth
        ranges = np.array(
            [
                range_from_tof(m.tof_measured, profile, -pos[2], assumed_target_depth)
                for m, pos in zip(measurements, anchor_pos)
            ]
        )
        dist = np.linalg.norm(cands[:, None, :] - anchor_pos[None, :, :], axis=-1)
        terms = w * (dist - ranges) ** 2
    else:
        raise ValueError(f"unknown fitness mode {mode!r}")

    total = terms.sum(axis=1)
    return float(total[0]) if scalar_in else total


def evolve_generation(
    population: np.ndarray,
    fitness_values: np.ndarray,
    config: GaConfig,
    rng: np.random.Generator,
    sigma: float,
) -> np.ndarray:
    """One generation step: elitism, tournament, BLX-0.5, mutation, clamp.

    The elite_count best individuals are copied verbatim; the remainder
    come from tournament-selected parents, blended with probability
    crossover_rate (otherwise cloned from the first parent), then each
    coordinate is perturbed with probability mutation_rate by Gaussian
    noise of the given sigma. Offspring are clamped to the search bounds.
    """
    pop = np.asarray(population, float)
    fits = np.asarray(fitness_values, float)
    n = config.population_size
    if pop.shape != (n, 3):
        raise ValueError(f"population shape {pop.shape} does not match config ({n}, 3)")

    order = np.argsort(fits, kind="stable")
    elites = pop[order[: config.elite_count]].copy()
    n_off = n - config.elite_count
    if n_off == 0:
        return elites

    contenders = rng.integers(0, n, size=(n_off, 2, config.tournament_size))
    best_slot = fits[contenders].argmin(axis=-1)
    parent_idx = np.take_along_axis(contenders, best_slot[..., None], axis=-1)[..., 0]
    p1 = pop[parent_idx[:, 0]]
    p2 = pop[parent_idx[:, 1]]

    do_cross = rng.random(n_off) < config.crossover_rate
    span = np.abs(p1 - p2)
    lo = np.minimum(p1, p2) - 0.5 * span
    hi = np.maximum(p1, p2) + 0.5 * span
    blend = lo + rng.random((n_off, 3)) * (hi - lo)
    children = np.where(do_cross[:, None], blend, p1)

    mutate = rng.random((n_off, 3)) < config.mutation_rate
    children = children + mutate * rng.normal(0.0, sigma, size=(n_off, 3))

    bounds = config.search_bounds
    children = np.clip(children, bounds.lows(), bounds.highs())
    return np.vstack([elites, children])


def ga_localize(
    measurements,
    anchors,
    config: GaConfig,
    profile: ChannelProfile,
    path_model: str = "refracted",
    trace=None,
) -> PositionEstimate:
    """Run the genetic solver and return the best fix.

    Needs measurements from at least four distinct anchors. Deterministic
    given (measurements, anchors, config): all randomness flows from
    config.seed. trace, if given, is called as trace(generation,
    best_fitness, sigma) after every evaluated generation.
    """
    measurements = list(measurements)
    if not measurements:
        raise ValueError("no measurements supplied")
    distinct = {m.anchor_id for m in measurements}
    if len(distinct) < 4:
        raise ValueError(
            f"underdetermined fix: need measurements from >= 4 distinct anchors, "
            f"got {len(distinct)}"
        )
    _anchor_array(measurements, anchors)  # fail fast on unknown ids

    bounds = config.search_bounds
    if -bounds.up[0] > profile.total_depth:
        raise ValueError(
            f"search bounds reach below the water column "
            f"({-bounds.up[0]} m > {profile.total_depth} m)"
        )

    assumed_depth = -0.5 * (bounds.up[0] + bounds.up[1])

    def evaluate(pop):
        return fitness(
            pop,
            measurements,
            anchors,
            profile,
            mode=config.fitness_mode,
            path_model=path_model,
            snr_weighting=config.snr_weighting,
            assumed_target_depth=assumed_depth,
        )

    rng = np.random.default_rng(config.seed)
    pop = rng.uniform(bounds.lows(), bounds.highs(), size=(config.population_size, 3))
    sigma = config.initial_sigma()

    best_fit = np.inf
    stagnant = 0
    generations_run = config.generations
    for gen in range(config.generations):
        fits = evaluate(pop)
        gen_best = float(fits.min())
        if gen_best < best_fit:
            best_fit = gen_best
            stagnant = 0
        else:
            stagnant += 1
        if trace is not None:
            trace(gen, best_fit, sigma)
        if best_fit < FITNESS_STOP or stagnant >= STAGNATION_LIMIT:
            generations_run = gen + 1
            break
        if gen < config.generations - 1:
            pop = evolve_generation(pop, fits, config, rng, sigma)
            sigma *= config.mutation_sigma_decay

    best_idx = int(np.argmin(fits))
    best = pop[best_idx].copy()

    decile = max(1, config.population_size // 10)
    elite_idx = np.argsort(fits, kind="stable")[:decile]
    dists = np.linalg.norm(pop[elite_idx] - best, axis=1)
    dispersion = float(np.sqrt(np.mean(dists**2)))
    if dispersion > config.dispersion_warn_threshold:
        log.warning(
            "position fix poorly constrained: elite dispersion %.2f m exceeds %.2f m "
            "(degenerate anchor geometry?)",
            dispersion, config.dispersion_warn_threshold,
        )

    return PositionEstimate(
        position=best,
        best_fitness=float(fits[best_idx]),
        population_dispersion=dispersion,
        generations_run=generations_run,
    )
