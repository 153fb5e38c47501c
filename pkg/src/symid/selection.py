"""Genetic search for the best set of disjoint, mutually similar fragments.

An individual is a set of fragment ids whose index intervals are pairwise
disjoint. Its fitness rewards covering much of the contour with fragments
that stay spectrally close to each other:

    f(S) = (1 / (1 + max_{i<j in S} dist[i, j])) * (sum of raw lengths / contour length)

with the empty pairwise maximum defined as 0, so a singleton scores its
length ratio. The search uses elitism, outbreeding mate choice, add/replace
and removal mutations, population uniqueness, and a stall-triggered restart
of the non-elite population. All randomness flows from one seeded generator
consumed in a fixed order, so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoFragments, OverlapViolation, PreconditionViolation, ShapeMismatch
from .spectral import DistanceWeights, SpectralSignature, _check_pairs, _distance_block, _stacked_parts


@dataclass
class GaConfig:
    seed: int
    population: int = 200
    alpha: float = 0.3          # add/replace mutation rate
    beta: float = 0.1           # removal mutation rate
    stall_limit: int = 5
    max_iterations: int = 1000
    elitism_count: int = 2
    outbreeding_pool: int = 10  # mates sampled when picking the second parent

    def __post_init__(self):
        if self.population < 2:
            raise PreconditionViolation("population must be at least 2")
        if not (0 <= self.alpha <= 1 and 0 <= self.beta <= 1):
            raise PreconditionViolation("mutation rates must lie in [0, 1]")
        if not (1 <= self.elitism_count < self.population):
            raise PreconditionViolation("elitism_count must be in 1..population-1")
        if self.stall_limit < 1 or self.max_iterations < 1:
            raise PreconditionViolation("stall_limit and max_iterations must be >= 1")


@dataclass
class CandidateSet:
    """A set of pairwise disjoint fragment ids with its score."""

    fragment_ids: tuple[int, ...]
    fitness: float
    generation_born: int = 0


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    restarts_so_far: int


@dataclass
class RunLog:
    generations: list[GenerationRecord] = field(default_factory=list)
    restarts: list[int] = field(default_factory=list)  # generations where the population was reseeded
    total_iterations: int = 0


def pairwise_matrix(sigs: list[SpectralSignature], w: DistanceWeights,
                    chunk: int = 128) -> np.ndarray:
    """Symmetric matrix of spectral distances, diagonal exactly zero."""
    if len(sigs) == 0:
        raise NoFragments("no signatures to compare")
    shape = sigs[0].coeffs.shape
    for k, s in enumerate(sigs):
        if s.coeffs.shape != shape:
            raise ShapeMismatch(f"signature {k} has shape {s.coeffs.shape}, expected {shape}")
    _check_pairs(shape[1], w.q)
    re, im = _stacked_parts(sigs, w.q)
    n = len(sigs)
    out = np.empty((n, n))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        out[lo:hi] = _distance_block(re[lo:hi], im[lo:hi], re, im, w.betas)
    np.fill_diagonal(out, 0.0)
    return out


def _sorted_ids(s) -> tuple[int, ...]:
    ids = tuple(sorted(s.fragment_ids if isinstance(s, CandidateSet) else s))
    if len(ids) == 0:
        raise PreconditionViolation("a candidate set needs at least one fragment")
    if len(set(ids)) != len(ids):
        raise PreconditionViolation("duplicate fragment ids in candidate set")
    return ids


def check_disjoint(ids, intervals):
    """Raise OverlapViolation unless the referenced intervals are disjoint."""
    spans = sorted((intervals[i][0], intervals[i][1], i) for i in ids)
    for (s0, e0, a), (s1, _, b) in zip(spans[:-1], spans[1:]):
        if s1 <= e0:
            raise OverlapViolation(f"fragments {a} and {b} overlap in [{s1}, {e0}]")


def fitness(s, dist: np.ndarray, raw_lens, contour_len: int, intervals=None) -> float:
    """Score a candidate set; see the module docstring for the formula.

    When ``intervals`` (list of (start, end)) is supplied, disjointness is
    verified first and OverlapViolation raised on failure.
    """
    ids = _sorted_ids(s)
    if intervals is not None:
        check_disjoint(ids, intervals)
    total = sum(raw_lens[i] for i in ids)
    if len(ids) == 1:
        worst = 0.0
    else:
        worst = float(dist[np.ix_(ids, ids)].max())
    return (1.0 / (1.0 + worst)) * (total / contour_len)


class _GaState:
    """Internal helpers bound to one select_optimal invocation."""

    def __init__(self, fragments, dist, cfg, contour_len):
        self.starts = np.array([f[0] for f in fragments], dtype=int)
        self.ends = np.array([f[1] for f in fragments], dtype=int)
        self.raw_lens = self.ends - self.starts + 1
        self.dist = dist
        self.cfg = cfg
        self.n = len(fragments)
        self.contour_len = contour_len
        self._fit_cache = {}

    def fitness(self, ids):
        got = self._fit_cache.get(ids)
        if got is None:
            total = int(self.raw_lens[list(ids)].sum())
            if len(ids) == 1:
                worst = 0.0
            else:
                sub = self.dist[np.ix_(ids, ids)]
                worst = float(sub.max())
            got = (1.0 / (1.0 + worst)) * (total / self.contour_len)
            self._fit_cache[ids] = got
        return got

    def disjoint_from(self, fid, ids):
        s, e = self.starts[fid], self.ends[fid]
        for other in ids:
            if s <= self.ends[other] and self.starts[other] <= e:
                return False
        return True

    def random_individual(self, rng):
        perm = rng.permutation(self.n)
        ids = []
        for fid in perm:
            fid = int(fid)
            if self.disjoint_from(fid, ids):
                ids.append(fid)
                if rng.random() > 0.8:
                    break
        return tuple(sorted(ids))

    def repair(self, ids_set):
        """Drop the lower-contribution member of each overlapping pair."""
        members = sorted(ids_set, key=lambda f: (self.starts[f], self.ends[f], f))
        changed = True
        while changed:
            changed = False
            for a in range(len(members) - 1):
                b = a + 1
                if self.starts[members[b]] <= self.ends[members[a]]:
                    u, v = members[a], members[b]
                    drop = u if (self.raw_lens[u], -u) < (self.raw_lens[v], -v) else v
                    members.remove(drop)
                    changed = True
                    break
        return tuple(sorted(members))

    def mutate(self, ids, rng):
        ids = list(ids)
        if rng.random() < self.cfg.alpha:
            added = False
            for _ in range(10):
                fid = int(rng.integers(self.n))
                if fid not in ids and self.disjoint_from(fid, ids):
                    ids.append(fid)
                    added = True
                    break
            if not added and len(ids) >= 1:
                victim = int(rng.integers(len(ids)))
                removed = ids.pop(victim)
                replaced = False
                for _ in range(10):
                    fid = int(rng.integers(self.n))
                    if fid not in ids and self.disjoint_from(fid, ids):
                        ids.append(fid)
                        replaced = True
                        break
                if not replaced:
                    ids.append(removed)
        if len(ids) > 1 and rng.random() < self.cfg.beta:
            ids.pop(int(rng.integers(len(ids))))
        return tuple(sorted(ids))

    def tournament(self, pop, fits, rng, k=3):
        picks = rng.integers(len(pop), size=k)
        best = min(picks, key=lambda i: (-fits[i], pop[i]))
        return pop[int(best)]

    def outbreed_mate(self, first, pop, rng):
        pool_size = min(self.cfg.outbreeding_pool, len(pop))
        picks = rng.choice(len(pop), size=pool_size, replace=False)
        first_set = set(first)

        def dissimilarity(i):
            return len(first_set.symmetric_difference(pop[int(i)]))

        best = max(picks, key=lambda i: (dissimilarity(i), pop[int(i)]))
        return pop[int(best)]


def select_optimal(fragments, dist: np.ndarray, cfg: GaConfig,
                   contour_len: int | None = None, on_generation=None):
    """Run the genetic search and return (best CandidateSet, RunLog).

    Args:
        fragments: list of (start, end) trajectory index pairs.
        dist: symmetric pairwise distance matrix over those fragments.
        cfg: GaConfig; identical inputs and seed give identical results.
        contour_len: normalizing length; defaults to max(end) + 1.
        on_generation: optional hook called as (generation, population list)
            after each generation, for sampling/inspection in tests.

    Raises:
        NoFragments: the fragment list is empty.
    """
    if len(fragments) == 0:
        raise NoFragments("cannot select from an empty fragment list")
    if dist.shape != (len(fragments), len(fragments)):
        raise PreconditionViolation("distance matrix shape does not match fragment count")
    if contour_len is None:
        contour_len = int(max(f[1] for f in fragments)) + 1

    state = _GaState(fragments, dist, cfg, contour_len)
    rng = np.random.default_rng(cfg.seed)
    log = RunLog()

    if state.n == 1:
        only = (0,)
        best = CandidateSet(only, state.fitness(only), 0)
        log.total_iterations = 0
        return best, log

    def fill_unique(target, existing):
        """Extend ``existing`` with fresh unique individuals up to ``target``."""
        seen = set(existing)
        attempts = 0
        while len(existing) < target and attempts < 50 * target:
            cand = state.random_individual(rng)
            attempts += 1
            if cand not in seen:
                seen.add(cand)
                existing.append(cand)
        return existing

    population = fill_unique(cfg.population, [])
    born = {ch: 0 for ch in population}
    best_ever, best_fit = None, -1.0
    stall = 0

    for gen in range(1, cfg.max_iterations + 1):
        fits = [state.fitness(ch) for ch in population]
        order = sorted(range(len(population)), key=lambda i: (-fits[i], population[i]))
        population = [population[i] for i in order]
        fits = [fits[i] for i in order]

        if fits[0] > best_fit:
            best_fit = fits[0]
            best_ever = population[0]
            stall = 0
        else:
            stall += 1

        log.generations.append(GenerationRecord(gen, fits[0], float(np.mean(fits)), len(log.restarts)))
        if on_generation is not None:
            on_generation(gen, list(population))

        if gen == cfg.max_iterations:
            break

        elites = population[: cfg.elitism_count]
        if stall >= cfg.stall_limit:
            log.restarts.append(gen)
            stall = 0
            population = fill_unique(cfg.population, list(elites))
        else:
            next_pop = list(elites)
            seen = set(next_pop)
            attempts = 0
            while len(next_pop) < cfg.population and attempts < 50 * cfg.population:
                attempts += 1
                p1 = state.tournament(population, fits, rng)
                p2 = state.outbreed_mate(p1, population, rng)
                child = state.repair(set(p1) | set(p2))
                child = state.mutate(child, rng)
                if child and child not in seen:
                    seen.add(child)
                    next_pop.append(child)
            population = next_pop
        for ch in population:
            born.setdefault(ch, gen)

    log.total_iterations = len(log.generations)
    winner = CandidateSet(best_ever, best_fit, born.get(best_ever, 0))
    return winner, log
