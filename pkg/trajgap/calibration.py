#!/usr/bin/env python3
"""
Per-gap calibration of car-following models.

The cost of a parameter vector is the tri-cube weighted sum of absolute
headway errors over the context windows on both sides of a gap; a real-coded
genetic algorithm with roulette-wheel selection searches the bounded
parameter box.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from cf_models import ModelFactory, CarFollowingModel
from errors import CalibrationFailedError, InvalidInputError, TrajGapError
from traj_core import GapSpec, VehiclePair

logger = logging.getLogger(__name__)


def tricube_weight(d: float, L: float) -> float:
    """
    Tri-cube kernel (1 - (d/L)^3)^3, zero for d >= L.

    Args:
        d: Distance from the gap edge
        L: Window length in the same units
    """
    if L <= 0:
        raise InvalidInputError(f"window length must be positive, got {L}")
    if d < 0:
        raise InvalidInputError(f"distance must be non-negative, got {d}")
    ratio = d / L
    if ratio >= 1.0:
        return 0.0
    return (1.0 - ratio ** 3) ** 3


@dataclass(frozen=True)
class WeightProfile:
    """Weights for one context window ordered by distance from the gap edge, nearest first"""
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1:
            raise InvalidInputError("weights must be one-dimensional")
        if len(w) and (np.any(w < 0) or np.any(w > 1)):
            raise InvalidInputError("weights must lie in [0, 1]")
        if len(w) > 1 and np.any(np.diff(w) > 0):
            raise InvalidInputError("weights must be non-increasing with distance")
        w.flags.writeable = False
        object.__setattr__(self, 'weights', w)

    @classmethod
    def tricube(cls, n_samples: int, h: float = 0.1, length_s: Optional[float] = None) -> 'WeightProfile':
        """Tri-cube profile for a window of ``n_samples``; the gap-adjacent sample sits at d = 0"""
        L = length_s if length_s is not None else n_samples * h
        return cls(np.array([tricube_weight(i * h, L) for i in range(n_samples)]))

    def __len__(self) -> int:
        return len(self.weights)


def weighted_abs_error(predicted: Sequence[float], observed: Sequence[float], weights: Sequence[float]) -> float:
    """Sum of w_i * |predicted_i - observed_i|"""
    predicted = np.asarray(predicted, dtype=float)
    observed = np.asarray(observed, dtype=float)
    weights = np.asarray(weights, dtype=float)
    return float(np.sum(weights * np.abs(predicted - observed)))


def _anchor_prev(pair: VehiclePair, idx: int) -> Optional[float]:
    if idx >= 0 and pair.headway.present[idx]:
        return float(pair.headway.s[idx])
    return None


def weighted_cost(model: CarFollowingModel, pair: VehiclePair, gap: GapSpec, profile: WeightProfile) -> float:
    """
    Weighted absolute headway error of ``model`` over both context windows.

    The before-window prediction is anchored at the window start, the
    after-window prediction at the first sample after the gap.
    """
    b0, b1 = gap.before_window
    a0, a1 = gap.after_window
    if len(profile) != b1 - b0 + 1 or len(profile) != a1 - a0 + 1:
        raise InvalidInputError("weight profile length does not match the context windows")
    series = pair.headway
    before_obs = series.observed(b0, b1)
    after_obs = series.observed(a0, a1)

    before_pred = model.predict_range(pair.follower, b0, b1, before_obs[0], _anchor_prev(pair, b0 - 1))
    after_pred = model.predict_range(pair.follower, a0, a1, after_obs[0], None)
    return (weighted_abs_error(before_pred, before_obs, profile.weights[::-1])
            + weighted_abs_error(after_pred, after_obs, profile.weights))


def derive_seed(global_seed: int, *parts) -> int:
    """Stable 64-bit seed for a sub-task, independent of scheduling order"""
    text = '|'.join(str(p) for p in (global_seed,) + parts)
    return int.from_bytes(hashlib.sha256(text.encode('utf-8')).digest()[:8], 'little')


@dataclass
class GaConfig:
    """Configuration for the genetic algorithm"""
    population: int = 20
    generations: int = 50
    crossover_rate: float = 0.7
    mutation_rate: float = 0.1
    seed: int = 0
    elitism: int = 1
    mutation_scale: float = 0.1

    def __post_init__(self):
        if self.population < 2:
            raise InvalidInputError(f"population must be at least 2, got {self.population}")
        if self.generations < 0:
            raise InvalidInputError("generations must be non-negative")
        for name in ('crossover_rate', 'mutation_rate'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidInputError(f"{name} must be in [0, 1], got {value}")
        if not 0 <= self.elitism < self.population:
            raise InvalidInputError(f"elitism must be in [0, population), got {self.elitism}")

    @property
    def expected_evaluations(self) -> int:
        return self.population * (self.generations + 1)


@dataclass
class OptimizationOutcome:
    """Best-ever individual of a GA run"""
    best: np.ndarray
    cost: float
    evaluations: int
    failed_evaluations: int = 0
    history: List[float] = field(default_factory=list)


@dataclass
class CalibrationResult:
    """Calibrated parameters for one model on one gap"""
    model: str
    params: object
    cost: float
    evaluations: int
    seed: int
    history: List[float] = field(default_factory=list)


class GeneticCalibrator:
    """
    Real-coded genetic algorithm over a box.

    Chromosomes are parameter vectors. Fitness is 1 / (1 + cost); parents are
    drawn by roulette wheel, recombined by per-gene arithmetic blend and
    mutated per gene with Gaussian noise of ``mutation_scale`` times the
    bound range. The ``elitism`` best individuals of a generation replace the
    worst offspring of the next one unchanged.
    """

    def __init__(self, bounds: Sequence[Tuple[float, float]], config: GaConfig = None):
        self.config = config or GaConfig()
        bounds = np.asarray(bounds, dtype=float)
        if bounds.ndim != 2 or bounds.shape[1] != 2 or len(bounds) == 0:
            raise InvalidInputError("bounds must be a list of (low, high) pairs")
        if not np.all(np.isfinite(bounds)) or np.any(bounds[:, 0] >= bounds[:, 1]):
            raise InvalidInputError("bounds must be finite with low < high")
        self.low = bounds[:, 0]
        self.high = bounds[:, 1]
        self.failed_evaluations = 0

    def _evaluate(self, cost_fn: Callable[[np.ndarray], float], population: np.ndarray) -> np.ndarray:
        costs = np.empty(len(population))
        for i, individual in enumerate(population):
            try:
                value = float(cost_fn(individual))
            except (TrajGapError, ValueError, ArithmeticError) as e:
                logger.debug("Cost evaluation failed: %s", e)
                value = np.inf
            if not np.isfinite(value):
                self.failed_evaluations += 1
                value = np.inf
            costs[i] = value
        return costs

    @staticmethod
    def _roulette(rng: np.random.Generator, fitness: np.ndarray, count: int) -> np.ndarray:
        spins = rng.random(count)
        total = fitness.sum()
        if total <= 0:
            return np.minimum((spins * len(fitness)).astype(int), len(fitness) - 1)
        wheel = np.cumsum(fitness)
        return np.minimum(np.searchsorted(wheel, spins * wheel[-1], side='right'), len(fitness) - 1)

    def optimize(self, cost_fn: Callable[[np.ndarray], float], seed: Optional[int] = None) -> OptimizationOutcome:
        """
        Minimize ``cost_fn`` over the bounds.

        Args:
            cost_fn: Maps a parameter vector to a non-negative cost
            seed: RNG seed; defaults to the config seed

        Returns:
            OptimizationOutcome with the best-ever individual
        """
        cfg = self.config
        rng = np.random.Generator(np.random.PCG64(cfg.seed if seed is None else seed))
        n_pop, n_genes = cfg.population, len(self.low)
        span = self.high - self.low
        self.failed_evaluations = 0

        population = self.low + rng.random((n_pop, n_genes)) * span
        costs = self._evaluate(cost_fn, population)
        evaluations = n_pop
        best_i = int(np.argmin(costs))
        best, best_cost = population[best_i].copy(), float(costs[best_i])
        history = [best_cost]

        for _ in range(cfg.generations):
            fitness = np.where(np.isfinite(costs), 1.0 / (1.0 + costs), 0.0)
            parents = self._roulette(rng, fitness, 2 * n_pop)
            p1, p2 = population[parents[0::2]], population[parents[1::2]]

            cross = rng.random(n_pop) < cfg.crossover_rate
            lam = rng.random((n_pop, n_genes))
            children = np.where(cross[:, None], lam * p1 + (1.0 - lam) * p2, p1)

            mutate = rng.random((n_pop, n_genes)) < cfg.mutation_rate
            noise = rng.normal(0.0, 1.0, (n_pop, n_genes)) * (cfg.mutation_scale * span)
            children = np.clip(children + np.where(mutate, noise, 0.0), self.low, self.high)

            child_costs = self._evaluate(cost_fn, children)
            evaluations += n_pop

            if cfg.elitism:
                elite = np.argsort(costs, kind='stable')[:cfg.elitism]
                worst = np.argsort(child_costs, kind='stable')[::-1][:cfg.elitism]
                children[worst] = population[elite]
                child_costs[worst] = costs[elite]

            population, costs = children, child_costs
            gen_best = int(np.argmin(costs))
            if costs[gen_best] < best_cost:
                best, best_cost = population[gen_best].copy(), float(costs[gen_best])
            history.append(best_cost)

        return OptimizationOutcome(best=best, cost=best_cost, evaluations=evaluations,
                                   failed_evaluations=self.failed_evaluations, history=history)


def ga_calibrate(model_tag: str, pair: VehiclePair, gap: GapSpec, bounds: Dict[str, Tuple[float, float]],
                 cfg: GaConfig = None, seed: Optional[int] = None, profile: Optional[WeightProfile] = None,
                 model_options: Optional[dict] = None) -> CalibrationResult:
    """
    Calibrate one model on the context windows of one gap.

    Args:
        model_tag: gipps, idm, pipes or newell
        pair: Pair whose headway is observed on both context windows
        gap: Reconstructable gap
        bounds: Parameter name -> (low, high)
        cfg: GA configuration
        seed: Overrides ``cfg.seed`` for this run

    Raises:
        CalibrationFailedError: No parameter vector could be evaluated
    """
    cfg = cfg or GaConfig()
    if not gap.reconstructable:
        raise InvalidInputError(f"gap {gap.first_missing_idx}..{gap.last_missing_idx} is not reconstructable: {gap.reason}")
    matrix = ModelFactory.bounds_matrix(model_tag, bounds)
    profile = profile or WeightProfile.tricube(gap.context_samples, gap.h)
    options = model_options or {}

    def cost(vector: np.ndarray) -> float:
        model = ModelFactory.create(model_tag, vector, **options)
        return weighted_cost(model, pair, gap, profile)

    run_seed = cfg.seed if seed is None else seed
    outcome = GeneticCalibrator(matrix, cfg).optimize(cost, run_seed)
    if not np.isfinite(outcome.cost):
        raise CalibrationFailedError(model_tag)
    params = ModelFactory.model_class(model_tag).PARAMS.from_vector(outcome.best)
    logger.debug("Calibrated %s on gap %d..%d: cost %.4f after %d evaluations (%d failed)",
                 model_tag, gap.first_missing_idx, gap.last_missing_idx, outcome.cost,
                 outcome.evaluations, outcome.failed_evaluations)
    return CalibrationResult(model=model_tag, params=params, cost=outcome.cost,
                             evaluations=outcome.evaluations, seed=run_seed, history=outcome.history)
