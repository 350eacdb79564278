"""Search-algorithm integrations: the score as a warm-up / move oracle.

All algorithms treat a BenchTable as the "training" oracle — querying a
genotype's validation accuracy stands in for training it, and the tracked
result is the test accuracy of the best-by-validation architecture so far.
Rounds are independent: round r runs on its own generator seeded seed + r,
so trajectories are reproducible and rounds could run concurrently.

The score enters in two ways: `warmup` spends the first steps on the
highest-scored members of a pre-scored random pool; `move` (aging evolution
only) picks each parent by score instead of validation accuracy.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .data import make_rng
from .metric import ScoreTable
from .space import format_genotype, mutate, parse_genotype

ALGOS = ("random_search", "aging_evolution")
MODES = ("plain", "warmup", "move")


@dataclass(frozen=True)
class SearchConfig:
    algo: str
    mode: str = "plain"
    warmup_pool_size: int = 3000
    warmup_steps: int = 64
    train_budget: int = 300
    rounds: int = 100
    population_size: int = 64
    sample_size: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algo {self.algo!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "move" and self.algo != "aging_evolution":
            raise ValueError("mode 'move' is only defined for aging_evolution")
        for name in ("warmup_pool_size", "warmup_steps", "train_budget",
                     "rounds", "population_size", "sample_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.population_size < self.sample_size:
            raise ValueError("sample_size cannot exceed population_size")
        if self.mode == "warmup":
            if self.warmup_pool_size < self.warmup_steps:
                raise ValueError("warm-up pool smaller than warmup_steps")
            if self.warmup_pool_size < self.population_size:
                raise ValueError("warm-up pool smaller than population_size")


@dataclass(frozen=True)
class TrajectoryStep:
    step: int
    genotype: str
    val_acc: float
    best_test_acc: float


Trajectory = list[TrajectoryStep]


def scores_map(table: ScoreTable) -> dict[str, float]:
    """genotype -> epsilon mapping for use as a search scorer (NaN kept)."""
    return {r.genotype: r.epsilon for r in table.rows}


def _score_of(scorer, genotype: str) -> float:
    eps = scorer.get(genotype, math.nan)
    return eps if math.isfinite(eps) else -math.inf


def _ranked_pool(universe, pool_idx, scorer, bench):
    """Pool members ordered by (score desc, arch_id asc); NaN scores last."""
    members = [universe[i] for i in pool_idx]
    return sorted(members,
                  key=lambda g: (-_score_of(scorer, g),
                                 bench.rows[g].arch_id))


class _Tracker:
    """Best-by-validation bookkeeping shared by both algorithms."""

    def __init__(self, bench):
        self.bench = bench
        self.best_val = -math.inf
        self.best_test = math.nan
        self.steps: Trajectory = []

    def consume(self, genotype: str) -> None:
        row = self.bench.lookup(genotype)
        if row.val_acc > self.best_val:
            self.best_val = row.val_acc
            self.best_test = row.test_acc
        self.steps.append(TrajectoryStep(len(self.steps) + 1, genotype,
                                         row.val_acc, self.best_test))

    @property
    def budget_used(self) -> int:
        return len(self.steps)


def _need_scorer(cfg: SearchConfig, scorer) -> None:
    if cfg.mode != "plain" and scorer is None:
        raise ValueError(f"mode {cfg.mode!r} needs a scorer")


def random_search(cfg: SearchConfig, bench, scorer=None) -> list[Trajectory]:
    """Uniform random search, optionally score-guided for the first steps.

    warmup rounds draw a warmup_pool_size random pool, then consume its
    warmup_steps best-scored members first; remaining steps are uniform
    draws (with replacement) over the whole universe.
    """
    if cfg.algo != "random_search":
        raise ValueError(f"config is for {cfg.algo}")
    _need_scorer(cfg, scorer)
    universe = bench.genotypes()
    n = len(universe)
    if cfg.mode == "warmup" and cfg.warmup_pool_size > n:
        raise ValueError(f"warm-up pool {cfg.warmup_pool_size} exceeds "
                         f"universe of {n}")
    trajectories = []
    for r in range(cfg.rounds):
        rng = make_rng(cfg.seed + r)
        tracker = _Tracker(bench)
        if cfg.mode == "warmup":
            pool_idx = rng.choice(n, size=cfg.warmup_pool_size, replace=False)
            ranked = _ranked_pool(universe, pool_idx, scorer, bench)
            for g in ranked[:min(cfg.warmup_steps, cfg.train_budget)]:
                tracker.consume(g)
        while tracker.budget_used < cfg.train_budget:
            tracker.consume(universe[int(rng.integers(n))])
        trajectories.append(tracker.steps)
    return trajectories


def aging_evolution(cfg: SearchConfig, bench, scorer=None,
                    mutator=None) -> list[Trajectory]:
    """FIFO evolution: sample candidates, mutate the best, evict the oldest.

    Parent choice is by validation accuracy, or by score in `move` mode.
    warmup seeds the population from the top of the score-ranked pool;
    every population member consumed counts against the budget.  A custom
    `mutator(genotype, rng) -> Genotype` may replace single-edge mutation
    (tests use this to pin the child sequence).
    """
    if cfg.algo != "aging_evolution":
        raise ValueError(f"config is for {cfg.algo}")
    _need_scorer(cfg, scorer)
    if mutator is None:
        mutator = mutate
    universe = bench.genotypes()
    n = len(universe)
    if cfg.mode == "warmup" and cfg.warmup_pool_size > n:
        raise ValueError(f"warm-up pool {cfg.warmup_pool_size} exceeds "
                         f"universe of {n}")
    trajectories = []
    for r in range(cfg.rounds):
        rng = make_rng(cfg.seed + r)
        tracker = _Tracker(bench)
        population: deque[str] = deque()
        if cfg.mode == "warmup":
            pool_idx = rng.choice(n, size=cfg.warmup_pool_size, replace=False)
            seeds = _ranked_pool(universe, pool_idx, scorer, bench)
            seeds = seeds[:cfg.population_size]
        else:
            seeds = None
        while len(population) < cfg.population_size \
                and tracker.budget_used < cfg.train_budget:
            g = seeds[len(population)] if seeds is not None \
                else universe[int(rng.integers(n))]
            tracker.consume(g)
            population.append(g)
        while tracker.budget_used < cfg.train_budget:
            cand = rng.choice(len(population), size=cfg.sample_size,
                              replace=False)
            members = [population[int(i)] for i in cand]
            if cfg.mode == "move":
                keys = [_score_of(scorer, g) for g in members]
            else:
                keys = [bench.rows[g].val_acc for g in members]
            parent = members[int(np.argmax(keys))]
            child = _mutate_into_universe(parent, mutator, rng, bench)
            tracker.consume(child)
            population.append(child)
            if len(population) > cfg.population_size:
                population.popleft()
        trajectories.append(tracker.steps)
    return trajectories


def _mutate_into_universe(parent: str, mutator, rng, bench,
                          attempts: int = 32) -> str:
    """Mutate until the child exists in the bench universe.

    With a full-space table every child hits; partial tables get a bounded
    number of redraws before failing loudly.
    """
    g = parse_genotype(parent)
    for _ in range(attempts):
        child = format_genotype(mutator(g, rng))
        if child in bench:
            return child
    raise KeyError(f"no mutation of {parent!r} found in bench table "
                   f"after {attempts} attempts")


@dataclass(frozen=True)
class SelectionSummary:
    n: int
    runs: int
    val_mean: float
    val_std: float
    test_mean: float
    test_std: float


def n_sample_selection(n: int, runs: int, bench, scores: ScoreTable,
                       rng: np.random.Generator) -> SelectionSummary:
    """Best-of-n selection by score, averaged over runs.

    Per run: sample n valid-scored architectures uniformly without
    replacement, take the highest-scored one (ties broken uniformly at
    random so constant scores degrade to the random baseline), and record
    its accuracies.  Mean and population std over runs.
    """
    if n < 1 or runs < 1:
        raise ValueError("n and runs must be positive")
    pool = [(r.arch_id, r.genotype, r.epsilon) for r in scores.rows
            if math.isfinite(r.epsilon) and r.genotype in bench]
    pool.sort()
    if len(pool) < n:
        raise ValueError(f"only {len(pool)} valid scored architectures in "
                         f"the bench universe, need {n}")
    eps = np.array([p[2] for p in pool])
    val = np.array([bench.rows[p[1]].val_acc for p in pool])
    test = np.array([bench.rows[p[1]].test_acc for p in pool])
    vals = np.empty(runs)
    tests = np.empty(runs)
    for i in range(runs):
        idx = rng.choice(len(pool), size=n, replace=False)
        sample_eps = eps[idx]
        winners = idx[sample_eps == sample_eps.max()]
        pick = int(winners[rng.integers(winners.size)])
        vals[i] = val[pick]
        tests[i] = test[pick]
    return SelectionSummary(n, runs, float(vals.mean()), float(vals.std()),
                            float(tests.mean()), float(tests.std()))


TRAJECTORY_HEADER = ["round", "step", "genotype", "val_acc", "best_test_acc"]


def write_trajectories_csv(trajectories: list[Trajectory], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_HEADER)
        for rnd, steps in enumerate(trajectories):
            for s in steps:
                w.writerow([rnd, s.step, s.genotype, repr(float(s.val_acc)),
                            repr(float(s.best_test_acc))])


def final_best_stats(trajectories: list[Trajectory]) -> tuple[float, float]:
    """Mean and population std of each round's final best test accuracy."""
    finals = np.array([t[-1].best_test_acc for t in trajectories])
    return float(finals.mean()), float(finals.std())
