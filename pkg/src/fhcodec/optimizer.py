"""Per-beam mantissa bitwidth training by surrogate optimization.

The objective trades mean mantissa length against holding the detection
EVM at a target, with a soft penalty for bitwidths that grow along the
power-sorted beam order:

    L = mean(B) + alpha * max(EVM / EVM0 - 1, 0) + beta * sum(max(B[i+1] - B[i], 0))

The search is derivative-free: a cubic radial-basis interpolant with a
linear tail approximates the sampled objective; candidates come from
integer perturbations of the incumbent plus uniform random points, scored
by a cycling blend of predicted value and distance to the evaluated set so
the search alternates between refining and exploring.
"""

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator

from .rng import TAG_OPTIMIZER, stream
from .validation import as_profile

#: Cycled exploitation weights for candidate scoring.
SCORE_WEIGHT_CYCLE = (0.3, 0.5, 0.8, 0.95)

#: Search spaces up to this size get fully enumerated into the candidate
#: pool, which makes the search exhaustive once the budget covers the space.
_ENUMERABLE_SPACE = 4096


@dataclass
class LossWeights:
    """Scaling of the EVM and monotonicity penalties against mean bits."""

    alpha: float = 32.0
    beta: float = 0.5
    evm_target_percent: float | None = None

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")


def profile_loss(profile, evm_percent: float, weights: LossWeights,
                 evm_target_percent: float | None = None) -> float:
    """Three-term training loss for one profile evaluation."""
    profile = np.asarray(profile, dtype=np.float64)
    if evm_percent < 0:
        raise ValueError("evm_percent must be non-negative")
    target = weights.evm_target_percent if evm_target_percent is None else evm_target_percent
    if target is None or target <= 0:
        raise ValueError("a positive EVM target is required")
    mean_bits = float(np.mean(profile))
    evm_excess = max(evm_percent / target - 1.0, 0.0)
    ascents = float(np.sum(np.maximum(np.diff(profile), 0.0)))
    return mean_bits + weights.alpha * evm_excess + weights.beta * ascents


def monotone_projection(profile) -> np.ndarray:
    """Clamp each bitwidth to its predecessor: ``B[i+1] <- min(B[i+1], B[i])``."""
    out = np.asarray(profile, dtype=np.int64).copy()
    for i in range(1, out.size):
        out[i] = min(out[i], out[i - 1])
    return out


class RbfSurrogate:
    """Cubic radial-basis interpolant with a linear polynomial tail."""

    def __init__(self):
        self.points = None
        self._coef = None

    def fit(self, points: np.ndarray, values: np.ndarray) -> "RbfSurrogate":
        points = np.asarray(points, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        n, dim = points.shape
        phi = cdist(points, points) ** 3
        tail = np.hstack([np.ones((n, 1)), points])
        system = np.block([[phi, tail], [tail.T, np.zeros((dim + 1, dim + 1))]])
        rhs = np.concatenate([values, np.zeros(dim + 1)])
        try:
            self._coef = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError:
            self._coef, *_ = np.linalg.lstsq(system, rhs, rcond=None)
        self.points = points
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        n = self.points.shape[0]
        phi = cdist(x, self.points) ** 3
        tail = np.hstack([np.ones((x.shape[0], 1)), x])
        return phi @ self._coef[:n] + tail @ self._coef[n:]


def _random_point(rng, dim, lo, hi):
    return tuple(int(v) for v in rng.integers(lo, hi + 1, size=dim))


def _perturb(rng, incumbent, lo, hi):
    x = list(incumbent)
    dim = len(x)
    changed = False
    for i in range(dim):
        if rng.random() < max(0.3, 1.0 / dim):
            step = int(rng.choice((-2, -1, 1, 2)))
            x[i] = min(hi, max(lo, x[i] + step))
            changed = changed or x[i] != incumbent[i]
    if not changed:
        i = int(rng.integers(dim))
        x[i] = min(hi, max(lo, x[i] + (1 if rng.random() < 0.5 else -1)))
    return tuple(x)


def surrogate_minimize(objective: Callable[[np.ndarray], float], dim: int,
                       bounds: tuple[int, int] = (1, 10), budget: int = 100,
                       seed: int = 0, initial_points: Sequence | None = None,
                       full_output: bool = False):
    """Global integer minimization of a black-box objective.

    Evaluates at most ``budget`` points inside ``[bounds[0], bounds[1]]^dim``
    and returns the best one found (deterministic in ``seed``); with
    ``full_output`` also returns its value and the full evaluation history.
    Search spaces small enough to enumerate are covered exactly once the
    budget allows.
    """
    lo, hi = int(bounds[0]), int(bounds[1])
    if hi < lo:
        raise ValueError("empty bounds")
    if budget < dim + 2:
        raise ValueError(f"budget {budget} is too small, need at least {dim + 2}")
    space_size = (hi - lo + 1) ** dim
    rng = stream(seed, TAG_OPTIMIZER)
    evaluated: dict[tuple, float] = {}

    def evaluate(point: tuple) -> float:
        value = float(objective(np.asarray(point, dtype=np.int64)))
        evaluated[point] = value
        return value

    init: list[tuple] = []
    if initial_points is not None:
        for p in initial_points:
            p = tuple(int(v) for v in p)
            if len(p) != dim or min(p) < lo or max(p) > hi:
                raise ValueError(f"initial point {p} outside bounds")
            if p not in init:
                init.append(p)
    n_init = min(budget, max(2 * (dim + 1), len(init)), space_size)
    attempts = 0
    while len(init) < n_init and attempts < 200 * n_init:
        p = _random_point(rng, dim, lo, hi)
        attempts += 1
        if p not in init:
            init.append(p)
    for p in init[:budget]:
        evaluate(p)

    incumbent = min(evaluated, key=lambda p: (evaluated[p], p))
    iteration = 0
    while len(evaluated) < min(budget, space_size):
        points = np.array(list(evaluated), dtype=np.float64)
        values = np.array(list(evaluated.values()))
        surrogate = RbfSurrogate().fit(points, values)

        pool: dict[tuple, None] = {}
        for _ in range(max(40, 8 * dim)):
            pool.setdefault(_perturb(rng, incumbent, lo, hi))
        for _ in range(40):
            pool.setdefault(_random_point(rng, dim, lo, hi))
        if space_size <= _ENUMERABLE_SPACE:
            for p in itertools.product(range(lo, hi + 1), repeat=dim):
                pool.setdefault(p)
        candidates = [p for p in pool if p not in evaluated]
        if not candidates:
            continue
        cand = np.array(candidates, dtype=np.float64)
        predicted = surrogate.predict(cand)
        spread = float(np.ptp(predicted))
        value_score = (predicted - predicted.min()) / (spread if spread > 0 else 1.0)
        distance = cdist(cand, points).min(axis=1)
        dspread = float(np.ptp(distance))
        distance_score = 1.0 - (distance - distance.min()) / (dspread if dspread > 0 else 1.0)
        weight = SCORE_WEIGHT_CYCLE[iteration % len(SCORE_WEIGHT_CYCLE)]
        best = int(np.argmin(weight * value_score + (1.0 - weight) * distance_score))
        chosen = candidates[best]
        value = evaluate(chosen)
        if (value, chosen) < (evaluated[incumbent], incumbent):
            incumbent = chosen
        iteration += 1

    incumbent = min(evaluated, key=lambda p: (evaluated[p], p))
    best_x = np.asarray(incumbent, dtype=np.int64)
    if full_output:
        return best_x, evaluated[incumbent], dict(evaluated)
    return best_x


def exhaustive_minimize(objective: Callable[[np.ndarray], float], dim: int,
                        bounds: tuple[int, int] = (1, 10)):
    """Exact global minimizer by full enumeration; ties break lexicographically."""
    lo, hi = int(bounds[0]), int(bounds[1])
    space_size = (hi - lo + 1) ** dim
    if space_size > 100_000:
        raise ValueError(f"search space of {space_size} points is too large to enumerate")
    best_point = None
    best_value = np.inf
    for p in itertools.product(range(lo, hi + 1), repeat=dim):
        value = float(objective(np.asarray(p, dtype=np.int64)))
        if value < best_value:
            best_point, best_value = p, value
    return np.asarray(best_point, dtype=np.int64)


@dataclass
class TrainingScenario:
    """One prepared scenario the trainer can evaluate profiles against.

    ``evaluate_evm`` maps a bitwidth profile to the compression-only
    detection EVM in percent; ``baseline_evm`` is that metric for the
    uniform reference profile and serves as the default EVM target.
    """

    n_beam: int
    evaluate_evm: Callable[[np.ndarray], float]
    baseline_evm: float


#: Readout evaluations reserved for re-checking monotone projections.
_READOUT_CANDIDATES = 8


def _seed_profiles(dim: int, lo: int, hi: int) -> list[tuple]:
    """Initial samples for profile training.

    Always contains the uniform 6-bit reference; the rest are non-increasing
    staircases, the shape optimal profiles take over power-sorted beams.
    """
    seeds = [tuple([min(max(6, lo), hi)] * dim)]
    seeds.append(tuple(int(round(v)) for v in np.linspace(hi, lo, dim)))
    for head_bits in (8, 6, 4):
        for split in {max(1, dim // 8), max(1, dim // 4), max(1, dim // 2)}:
            profile = (min(head_bits, hi),) * split + (lo,) * (dim - split)
            seeds.append(profile)
    unique = []
    for s in seeds:
        if s not in unique:
            unique.append(s)
    return unique


def train_profile(mode: str, scenarios: Sequence[TrainingScenario],
                  weights: LossWeights | None = None, budget: int | None = None,
                  seed: int = 0) -> np.ndarray:
    """Train per-beam bitwidths for one scenario (online) or a set (offline).

    The online mode fits the single given scenario; offline minimizes the
    mean loss over at least two scenarios so the profile transfers.  The
    uniform 6-bit profile is always part of the initial samples, so training
    cannot end up worse than the fixed-length baseline; the returned profile
    is the best monotone (non-increasing) projection among the top evaluated
    points, re-evaluated after projection.
    """
    if mode not in ("online", "offline"):
        raise ValueError(f"mode must be 'online' or 'offline', got {mode!r}")
    if not scenarios:
        raise ValueError("at least one scenario is required")
    if mode == "online" and len(scenarios) != 1:
        raise ValueError("online mode trains exactly one scenario")
    if mode == "offline" and len(scenarios) < 2:
        raise ValueError("offline mode needs at least two scenarios")
    weights = weights or LossWeights()
    dim = scenarios[0].n_beam
    if any(sc.n_beam != dim for sc in scenarios):
        raise ValueError("all scenarios must share the beam count")
    budget = 60 * dim if budget is None else int(budget)
    lo, hi = 1, 10

    targets = [weights.evm_target_percent or sc.baseline_evm for sc in scenarios]
    if any(t is None or t <= 0 for t in targets):
        raise ValueError("every scenario needs a positive EVM target")

    def objective(profile: np.ndarray) -> float:
        return float(np.mean([
            profile_loss(profile, sc.evaluate_evm(profile), weights, target)
            for sc, target in zip(scenarios, targets)
        ]))

    baseline = tuple([min(max(6, lo), hi)] * dim)
    search_budget = max(dim + 2, budget - _READOUT_CANDIDATES)
    seeds = _seed_profiles(dim, lo, hi)[:max(1, search_budget // 2)]
    _, _, history = surrogate_minimize(
        objective, dim, bounds=(lo, hi), budget=search_budget, seed=seed,
        initial_points=seeds, full_output=True,
    )

    ranked = sorted(history, key=lambda p: (history[p], p))
    readout = [baseline] + ranked[:_READOUT_CANDIDATES]
    best_profile, best_loss = None, np.inf
    seen = set()
    for point in readout:
        projected = tuple(monotone_projection(np.asarray(point)))
        if projected in seen:
            continue
        seen.add(projected)
        value = (history[projected] if projected in history
                 else objective(np.asarray(projected, dtype=np.int64)))
        if value < best_loss:
            best_profile, best_loss = projected, value
    return as_profile(np.asarray(best_profile, dtype=np.int64))


class MantissaBitwidthTrainer(BaseEstimator):
    """Scikit-learn style wrapper around :func:`train_profile`.

    ``fit(scenarios)`` stores the trained profile in ``profile_``.
    """

    def __init__(self, mode: str = "online", alpha: float = 32.0, beta: float = 0.5,
                 evm_target_percent: float | None = None, budget: int | None = None,
                 seed: int = 0):
        self.mode = mode
        self.alpha = alpha
        self.beta = beta
        self.evm_target_percent = evm_target_percent
        self.budget = budget
        self.seed = seed

    def fit(self, scenarios: Sequence[TrainingScenario], y=None):
        weights = LossWeights(alpha=self.alpha, beta=self.beta,
                              evm_target_percent=self.evm_target_percent)
        self.profile_ = train_profile(self.mode, scenarios, weights,
                                      budget=self.budget, seed=self.seed)
        return self
