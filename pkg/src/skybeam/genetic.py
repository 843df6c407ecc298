"""Elite genetic search over one replacement beam per designated cell.

A genome concatenates one codeword index and one transmit power per
designated cell: [idx_0 .. idx_{n-1} | p_0 .. p_{n-1}], indices in
[0, N_CB), powers in (0, p_max] mW on a linear scale. Applying a genome to
the baseline plan swaps exactly one pre-selected slot per designated cell and
leaves every other cell untouched.

Fitness is the minimum coverage SINR over all highway points, with a hard
-inf penalty whenever any point would associate to a cell other than the one
designated for its segment. The search loop is a plain elite GA: rank,
crossover of uniformly drawn parent pairs, per-gene mutation, elites
overwrite the worst.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .association import BeamPlan, coverage_sinr_all, rsrp_table, select_serving_all
from .channel import ChannelSet
from .codebook import Codebook
from .config import ConfigError


@dataclass(frozen=True)
class EgaParams:
    n_pop: int = 100
    n_parents: int = 75
    n_elites: int = 20
    p_cross: float = 0.2
    p_mut: float = 0.75
    max_iters: int = 15000
    stop_iters: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.n_elites <= self.n_parents <= self.n_pop):
            raise ConfigError("optimizer requires 0 < n_elites <= n_parents <= n_pop")
        for name in ("p_cross", "p_mut"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"optimizer.{name} must lie in [0, 1]")


def ega_params_from_config(cfg: dict, seed: int | None = None) -> EgaParams:
    block = cfg["optimizer"]
    return EgaParams(
        n_pop=int(block["n_pop"]),
        n_parents=int(block["n_parents"]),
        n_elites=int(block["n_elites"]),
        p_cross=float(block["p_cross"]),
        p_mut=float(block["p_mut"]),
        max_iters=int(block["max_iters"]),
        stop_iters=int(block["stop_iters"]),
        seed=int(cfg["seeds"]["master"]) if seed is None else int(seed),
    )


@dataclass
class Individual:
    genome: np.ndarray  # 2n floats; first half integer-valued codeword indices
    fitness: float = -math.inf


@dataclass
class FitnessTrace:
    iterations: list[int] = field(default_factory=list)
    best_fitness: list[float] = field(default_factory=list)
    evaluations: list[int] = field(default_factory=list)

    def record(self, iteration: int, best: float, evals: int) -> None:
        self.iterations.append(iteration)
        self.best_fitness.append(best)
        self.evaluations.append(evals)

    def to_csv(self, path) -> None:
        lines = ["iteration,best_fitness_db,evals"]
        for i, f, e in zip(self.iterations, self.best_fitness, self.evaluations):
            lines.append(f"{i},{f:.10g},{e}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def select_frozen_slots(
    baseline: BeamPlan,
    designated_cells: tuple[int, ...],
    gue_serving_sector: np.ndarray,
    gue_serving_slot: np.ndarray,
) -> dict[int, int]:
    """For each designated cell, the slot whose beam the search may replace.

    Picks the slot serving the fewest ground users under the baseline.
    Designated cells avoid reusing a sweep slot already frozen by another
    designated cell while slots remain: replacement beams all target the same
    corridor, so co-slot picks would make them interfere with each other
    during measurement. Ties break toward the lowest slot id.
    """
    frozen: dict[int, int] = {}
    taken: set[int] = set()
    for cell in designated_cells:
        counts = np.zeros(baseline.n_slots, dtype=int)
        mine = gue_serving_sector == cell
        for slot in gue_serving_slot[mine]:
            counts[slot] += 1
        order = np.argsort(counts, kind="stable")  # fewest gUEs first, then slot id
        free = [int(s) for s in order if int(s) not in taken]
        slot = free[0] if free else int(order[0])
        frozen[cell] = slot
        taken.add(slot)
    return frozen


def apply_individual(
    genome: np.ndarray,
    baseline: BeamPlan,
    designated_cells: tuple[int, ...],
    frozen_slots: dict[int, int],
) -> BeamPlan:
    """Baseline plan with one slot per designated cell replaced by the genome."""
    n = len(designated_cells)
    if genome.shape[0] != 2 * n:
        raise ValueError("genome length must be twice the designated-cell count")
    plan = baseline.copy()
    for j, cell in enumerate(designated_cells):
        slot = frozen_slots[cell]
        plan.codeword[cell, slot] = int(round(genome[j]))
        p_mw = float(genome[n + j])
        if p_mw <= 0.0:
            raise ValueError("power genes must be positive (linear mW)")
        plan.power_dbm[cell, slot] = 10.0 * math.log10(p_mw)
        plan.x[cell, slot] = 1  # sweep index inherited from the replaced slot
    return plan


class FitnessEvaluator:
    """Minimum highway coverage SINR of a genome, with association constraint.

    Precomputes the baseline RSRP table over all highway points and, for each
    designated cell, the beam gain of every codeword, so one evaluation is a
    handful of vectorized table updates. Results are cached by genome bytes
    because the search re-evaluates whole populations each iteration.
    """

    def __init__(
        self,
        point_channels: ChannelSet,
        ssb_codebook: Codebook,
        baseline: BeamPlan,
        designated_cells: tuple[int, ...],
        frozen_slots: dict[int, int],
        required_cell: np.ndarray,
        noise_mw: float,
    ):
        self.codebook = ssb_codebook
        self.baseline = baseline
        self.designated_cells = tuple(designated_cells)
        self.frozen_slots = dict(frozen_slots)
        self.required_cell = np.asarray(required_cell, dtype=int)
        self.noise_mw = float(noise_mw)
        self.n_codewords = len(ssb_codebook)
        self.evals = 0
        self._cache: dict[bytes, tuple[float, int]] = {}

        self._base_table = rsrp_table(point_channels, baseline, ssb_codebook)
        n_points = self._base_table.shape[0]
        if self.required_cell.shape[0] != n_points:
            raise ValueError("required_cell must give one sector per highway point")
        # per designated cell: beta * |h^T w|^2 for every codeword -> (N_r, N_CB)
        self._gain: list[np.ndarray] = []
        for cell in self.designated_cells:
            proj = np.abs(point_channels.h[:, cell, :] @ ssb_codebook.weights.T) ** 2
            self._gain.append(point_channels.beta[:, cell, None] * proj)
        # the vectorized interference path assumes sweep index == slot index,
        # which both the baseline and any applied genome preserve
        sweep = baseline.sweep
        self._slot_sweep = bool(np.all(sweep == np.arange(baseline.n_slots)[None, :]))

    def evaluate(self, genome: np.ndarray) -> float:
        """Fitness of a genome: min coverage SINR in dB, -inf if any point
        associates outside its designated cell."""
        return self.evaluate_detailed(genome)[0]

    def evaluate_detailed(self, genome: np.ndarray) -> tuple[float, int]:
        """(fitness, association violation count); the count only orders
        equally infeasible genomes during the search."""
        key = np.asarray(genome, dtype=float).tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        value = self._evaluate_uncached(np.asarray(genome, dtype=float))
        self._cache[key] = value
        return value

    def _evaluate_uncached(self, genome: np.ndarray) -> tuple[float, int]:
        self.evals += 1
        n = len(self.designated_cells)
        table = self._base_table.copy()
        for j, cell in enumerate(self.designated_cells):
            slot = self.frozen_slots[cell]
            ci = int(round(genome[j]))
            table[:, cell, slot] = self._gain[j][:, ci] * genome[n + j]
        serving_b, serving_s = select_serving_all(table)
        violations = int(np.sum(serving_b != self.required_cell))
        if violations:
            return -math.inf, violations
        rows = np.arange(table.shape[0])
        numerator = table[rows, serving_b, serving_s]
        if self._slot_sweep:
            same_slot = np.take_along_axis(
                table, serving_s[:, None, None], axis=2
            )[:, :, 0]
            interference = same_slot.sum(axis=1) - numerator
            sinr = numerator / (interference + self.noise_mw)
            return float(np.min(10.0 * np.log10(sinr))), 0
        sinr_db = coverage_sinr_all(table, serving_b, serving_s, self.baseline, self.noise_mw)
        return float(np.min(sinr_db)), 0

    def plan_for(self, genome: np.ndarray) -> BeamPlan:
        return apply_individual(genome, self.baseline, self.designated_cells, self.frozen_slots)


def fitness(genome: np.ndarray, evaluator: FitnessEvaluator) -> float:
    """Objective of one genome: min coverage SINR along the corridor (dB),
    or -inf when the designated association is violated anywhere."""
    return evaluator.evaluate(genome)


def _init_population(rng, n_pop: int, n_cells: int, n_cb: int, p_max_mw: float) -> np.ndarray:
    pop = np.empty((n_pop, 2 * n_cells))
    pop[:, :n_cells] = rng.integers(0, n_cb, size=(n_pop, n_cells))
    pop[:, n_cells:] = p_max_mw * (1.0 - rng.random(size=(n_pop, n_cells)))  # (0, p_max]
    return pop


def run(
    params: EgaParams,
    evaluator: FitnessEvaluator,
    p_max_dbm: float,
) -> tuple[Individual, FitnessTrace]:
    """Elite GA search; returns the best-ever genome and the fitness trace.

    Per iteration: evaluate and rank everyone, keep the top n_elites aside,
    breed n_pop offspring from uniformly drawn parent pairs (gene-wise swap
    with p_cross), mutate every gene with p_mut (indices resampled uniformly,
    powers redrawn on (0, p_max]), then overwrite the worst n_elites with the
    elites. Stops early when the best has not improved for stop_iters
    iterations. Fully deterministic given params.seed.

    Ranking is by fitness; genomes tied at -inf are ordered by how many
    points violate the designated association, which lets recombination
    assemble per-cell captures before any fully feasible genome exists.
    """
    n_cells = len(evaluator.designated_cells)
    if n_cells == 0:
        raise ValueError("no designated cells to optimize")
    n_cb = evaluator.n_codewords
    p_max_mw = 10.0 ** (p_max_dbm / 10.0)
    rng = np.random.default_rng(params.seed)
    pop = _init_population(rng, params.n_pop, n_cells, n_cb, p_max_mw)

    trace = FitnessTrace()
    best_genome = pop[0].copy()
    best_fitness = -math.inf
    best_violations = np.inf
    last_improvement = 0

    for iteration in range(params.max_iters):
        detailed = [evaluator.evaluate_detailed(g) for g in pop]
        scores = np.array([d[0] for d in detailed])
        violations = np.array([d[1] for d in detailed], dtype=float)
        # primary: fitness descending; tie-break among -inf: fewer violations
        order = np.lexsort((violations, np.negative(scores)))
        pop = pop[order]
        scores = scores[order]
        violations = violations[order]
        improved = scores[0] > best_fitness or (
            scores[0] == best_fitness and violations[0] < best_violations
        )
        if improved:
            best_fitness = float(scores[0])
            best_violations = float(violations[0])
            best_genome = pop[0].copy()
            last_improvement = iteration
        trace.record(iteration, best_fitness, evaluator.evals)

        if iteration - last_improvement >= params.stop_iters:
            break

        elites = pop[: params.n_elites].copy()
        parents = pop[: params.n_parents]

        n_pairs = (params.n_pop + 1) // 2
        pair_idx = rng.integers(0, params.n_parents, size=(n_pairs, 2))
        a = parents[pair_idx[:, 0]].copy()
        b = parents[pair_idx[:, 1]].copy()
        swap = rng.random(size=a.shape) <= params.p_cross
        a_swapped = np.where(swap, b, a)
        b_swapped = np.where(swap, a, b)
        offspring = np.empty((2 * n_pairs, 2 * n_cells))
        offspring[0::2] = a_swapped
        offspring[1::2] = b_swapped
        pop = offspring[: params.n_pop]

        mut_idx = rng.random(size=(params.n_pop, n_cells)) <= params.p_mut
        new_idx = rng.integers(0, n_cb, size=(params.n_pop, n_cells))
        pop[:, :n_cells] = np.where(mut_idx, new_idx, pop[:, :n_cells])
        mut_pw = rng.random(size=(params.n_pop, n_cells)) <= params.p_mut
        new_pw = p_max_mw * (1.0 - rng.random(size=(params.n_pop, n_cells)))
        pop[:, n_cells:] = np.where(mut_pw, new_pw, pop[:, n_cells:])

        pop[params.n_pop - params.n_elites :] = elites

    return Individual(genome=best_genome, fitness=best_fitness), trace


def export_plan_json(
    plan: BeamPlan,
    designated_cells: tuple[int, ...],
    frozen_slots: dict[int, int],
    path,
) -> None:
    """Persist the optimized beams (only the entries that differ from baseline)."""
    entries = []
    for cell in designated_cells:
        slot = frozen_slots[cell]
        entries.append(
            {
                "sector": int(cell),
                "slot": int(slot),
                "codeword": int(plan.codeword[cell, slot]),
                "power_dbm": float(plan.power_dbm[cell, slot]),
            }
        )
    payload = {"modified_beams": entries, "n_sectors": int(plan.n_sectors)}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
