"""Evolutionary explorer: variable-length operation genomes, one-point
crossover, guided mutation, tournament selection with elitism."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .errors import ConfigError
from .gca import GcaModel
from .loop import ExperimentConfig, GenerationResult, PairEvent, Trajectory


@dataclass
class EaParams:
    crossover_rate: float = 0.3
    mutation_rate: float = 0.4
    elitism_fraction: float = 0.10
    tournament_size: int = 3
    min_len: int | None = None  # None: take the domain's defaults
    max_len: int | None = None

    def validate(self) -> None:
        for name in ("crossover_rate", "mutation_rate", "elitism_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.tournament_size < 2:
            raise ConfigError(f"tournament_size must be >= 2, got {self.tournament_size}")
        if self.min_len is not None and self.max_len is not None:
            if not 1 <= self.min_len <= self.max_len:
                raise ConfigError(
                    f"need 1 <= min_len <= max_len, got {self.min_len}..{self.max_len}"
                )


def crossover(
    ops_a: list[int],
    ops_b: list[int],
    rng: random.Random,
    min_len: int = 1,
    max_len: int | None = None,
) -> list[int]:
    """One-point crossover with an independent cut per parent.

    The child is a's prefix followed by b's suffix.  The second cut is
    restricted so the child never falls below min_len (truncation alone
    can only enforce the upper bound); anything past max_len is dropped.
    """
    cut_a = rng.randint(0, len(ops_a))
    hi = min(len(ops_b), cut_a + len(ops_b) - min_len)
    cut_b = rng.randint(0, hi) if hi > 0 else 0
    child = ops_a[:cut_a] + ops_b[cut_b:]
    if max_len is not None and len(child) > max_len:
        child = child[:max_len]
    return child


def mutate(
    ops: list[int],
    model: GcaModel | None,
    domain,
    rate: float,
    rng: random.Random,
) -> list[int]:
    """Replace each position independently with probability rate.

    Guided mode draws the replacement from the model's floored transition
    distribution conditioned on the preceding op (uniform over the
    vocabulary at position 0); standard mode draws uniformly from the
    domain's atomic operations.
    """
    out = list(ops)
    for t in range(len(out)):
        if rng.random() >= rate:
            continue
        if model is None:
            out[t] = rng.randrange(domain.atomic_count)
        elif t == 0:
            vocab = model.sampling_vocabulary()
            out[0] = vocab[rng.randrange(len(vocab))]
        else:
            out[t] = model.sample_successor(out[t - 1], None, rng)
    return out


def _tournament(
    population: list[Trajectory], size: int, rng: random.Random
) -> Trajectory:
    best_idx = rng.randrange(len(population))
    for _ in range(size - 1):
        idx = rng.randrange(len(population))
        if population[idx].fitness > population[best_idx].fitness or (
            population[idx].fitness == population[best_idx].fitness and idx < best_idx
        ):
            best_idx = idx
    return population[best_idx]


def select(
    population: list[Trajectory],
    params: EaParams,
    rng: random.Random,
    target_size: int | None = None,
) -> list[Trajectory]:
    """Elites carried over verbatim, remainder filled by tournaments with
    replacement.  target_size defaults to the input size."""
    n = target_size if target_size is not None else len(population)
    order = sorted(range(len(population)), key=lambda i: (-population[i].fitness, i))
    elite_count = min(n, math.ceil(params.elitism_fraction * n))
    survivors = [population[i] for i in order[:elite_count]]
    while len(survivors) < n:
        survivors.append(_tournament(population, params.tournament_size, rng))
    return survivors


@dataclass
class EaState:
    population: list[Trajectory]
    evaluated: bool = False


class EaExplorer:
    def __init__(self, params: EaParams | None = None):
        self.params = params or EaParams()
        self.params.validate()

    def check_domain(self, domain) -> None:
        if not hasattr(domain, "evaluate_sequence") or not hasattr(domain, "atomic_count"):
            raise ConfigError(
                f"domain {type(domain).__name__} does not evaluate operation sequences"
            )

    def _bounds(self, domain) -> tuple[int, int]:
        lo, hi = domain.default_genome_bounds
        if self.params.min_len is not None:
            lo = self.params.min_len
        if self.params.max_len is not None:
            hi = self.params.max_len
        return lo, hi

    def initialize(self, domain, config: ExperimentConfig, rng: random.Random) -> EaState:
        lo, hi = self._bounds(domain)
        population = []
        for _ in range(config.population_size):
            length = rng.randint(lo, hi)
            ops = [rng.randrange(domain.atomic_count) for _ in range(length)]
            population.append(Trajectory(ops=ops, atomic_ops=[]))
        return EaState(population)

    def _evaluate(self, ops: list[int], model: GcaModel | None, domain) -> Trajectory:
        flat = model.flatten_sequence(ops) if model is not None else ops
        return domain.evaluate_sequence(ops, flat)

    def run_generation(
        self,
        state: EaState,
        t: int,
        model: GcaModel | None,
        domain,
        config: ExperimentConfig,
        rng: random.Random,
    ) -> GenerationResult:
        p = self.params
        lo, hi = self._bounds(domain)
        evaluated: list[Trajectory] = []

        if not state.evaluated:
            state.population = [
                self._evaluate(traj.ops, model, domain) for traj in state.population
            ]
            evaluated.extend(state.population)
            state.evaluated = True

        population = state.population
        offspring: list[Trajectory] = []
        events: list[PairEvent] = []
        for _ in range(config.population_size):
            parent_a = _tournament(population, p.tournament_size, rng)
            parent_b = _tournament(population, p.tournament_size, rng)
            crossed = rng.random() < p.crossover_rate
            if crossed:
                child_ops = crossover(parent_a.ops, parent_b.ops, rng, lo, hi)
            else:
                child_ops = list(parent_a.ops)
            child_ops = mutate(child_ops, model, domain, p.mutation_rate, rng)
            child = self._evaluate(child_ops, model, domain)
            offspring.append(child)
            if crossed:
                events.append(PairEvent(parent_a, parent_b, child))
        evaluated.extend(offspring)

        state.population = select(
            population + offspring, p, rng, target_size=config.population_size
        )
        return GenerationResult(evaluated, events)
