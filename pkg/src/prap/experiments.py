"""Monte Carlo experiment harness.

Success-probability grids over (n, m), stagnation-point probing (does some
random start fail on a given instance?), threshold curves for the number of
measurements at which stagnation points disappear, and two numerical
validators for deterministic facts the solver analysis rests on: a pointwise
phase-perturbation inequality, and the positive margin of the expectation
f(t) = E[conj(Z1) |Z1| phase(Z1 + t Z2)] over complex Gaussians.

Every trial is a pure function of its SeedSpec, and all aggregation is
counting, so results are bitwise reproducible for any worker count.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple

import numpy as np

from prap.linalg import SingularGramError, phase_vec
from prap.model import SeedSpec, make_problem
from prap.solver import (
    EmptyTruncationError,
    SolverConfig,
    VERDICT_SUCCESS,
    is_almost_orthogonal,
    random_isotropic_init,
    run_ap,
)

logger = logging.getLogger("prap.experiments")

REJECTION_CAP = 1000

DEFAULT_T_GRID = (0.3, 0.5, 1.0, 1.5, 2.0, 2.5, 5.0, 20.0)
MIN_T = 0.05


def parse_m_rule(rule: str) -> tuple[float, int]:
    """Parse an m-from-n rule like "3n", "m=10*n" or "0.5n^2" into (k, power)."""
    text = rule.strip().lower().replace(" ", "")
    if text.startswith("m="):
        text = text[2:]
    match = re.fullmatch(r"([0-9.]*)\*?n(?:\^([12]))?", text)
    if not match:
        raise ValueError(f"cannot parse m rule {rule!r}; expected forms like '3n', '0.5n^2'")
    k = float(match.group(1)) if match.group(1) else 1.0
    power = int(match.group(2)) if match.group(2) else 1
    return k, power


def apply_m_rule(rule: str, n: int) -> int:
    k, power = parse_m_rule(rule)
    return max(1, int(round(k * n**power)))


@dataclass
class GridSpec:
    """One success-probability sweep: which cells, how many trials, which seed."""

    n_values: tuple[int, ...]
    m_values: tuple[int, ...] | None = None
    m_rule: str | None = None
    trials: int = 100
    master_seed: int = 0
    init_mode: str | None = None
    config: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        self.n_values = tuple(int(n) for n in self.n_values)
        if self.m_values is not None:
            self.m_values = tuple(int(m) for m in self.m_values)
        if not self.n_values:
            raise ValueError("n_values must be non-empty")
        if (self.m_values is None) == (self.m_rule is None):
            raise ValueError("give exactly one of m_values or m_rule")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.init_mode is not None:
            self.config = replace(self.config, init_mode=self.init_mode)

    def cells(self) -> list[tuple[int, int]]:
        if self.m_values is not None:
            out = [(n, m) for n in self.n_values for m in self.m_values]
        else:
            out = [(n, apply_m_rule(self.m_rule, n)) for n in self.n_values]
        return sorted(set(out))


@dataclass
class StagnationSpec:
    """Stagnation probing sweep: instances per cell, random starts per instance."""

    n_values: tuple[int, ...]
    m_values: tuple[int, ...] | None = None
    m_rule: str | None = None
    instances: int = 50
    inits_per_instance: int = 200
    master_seed: int = 0
    config: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        self.n_values = tuple(int(n) for n in self.n_values)
        if self.m_values is not None:
            self.m_values = tuple(int(m) for m in self.m_values)
        if not self.n_values:
            raise ValueError("n_values must be non-empty")
        if (self.m_values is None) == (self.m_rule is None):
            raise ValueError("give exactly one of m_values or m_rule")
        if self.instances < 1 or self.inits_per_instance < 1:
            raise ValueError("instances and inits_per_instance must be >= 1")

    def cells(self) -> list[tuple[int, int]]:
        if self.m_values is not None:
            out = [(n, m) for n in self.n_values for m in self.m_values]
        else:
            out = [(n, apply_m_rule(self.m_rule, n)) for n in self.n_values]
        return sorted(set(out))


@dataclass
class CellResult:
    n: int
    m: int
    trials: int
    successes: int
    mean_iterations: float

    @property
    def probability(self) -> float:
        return self.successes / self.trials


@dataclass
class GridResult:
    """Per-cell counts plus provenance; serializes to CSV or JSON."""

    kind: str  # "success" or "no_stagnation"
    cells: list[CellResult]
    master_seed: int
    config_hash: str
    wall_time: float

    def cell(self, n: int, m: int) -> CellResult:
        for c in self.cells:
            if c.n == n and c.m == m:
                return c
        raise KeyError(f"no cell ({n}, {m})")

    def to_csv(self) -> str:
        lines = ["n,m,trials,successes,probability,mean_iterations,seed"]
        for c in sorted(self.cells, key=lambda c: (c.n, c.m)):
            lines.append(
                f"{c.n},{c.m},{c.trials},{c.successes},"
                f"{c.probability!r},{c.mean_iterations!r},{self.master_seed}"
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "master_seed": self.master_seed,
            "config_hash": self.config_hash,
            "wall_time": self.wall_time,
            "cells": [
                {
                    "n": c.n,
                    "m": c.m,
                    "trials": c.trials,
                    "successes": c.successes,
                    "probability": c.probability,
                    "mean_iterations": c.mean_iterations,
                }
                for c in sorted(self.cells, key=lambda c: (c.n, c.m))
            ],
        }


def _config_hash(config: SolverConfig, extra: dict) -> str:
    payload = {"config": vars(config) | {}, **extra}
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def sample_not_almost_orthogonal(
    n: int,
    x0: np.ndarray,
    seed: SeedSpec | int | np.random.Generator,
    mu: float = 1.0,
    cap: int = REJECTION_CAP,
) -> np.ndarray:
    """Uniform unit-sphere draw, resampled until not almost orthogonal to x0.

    The almost-orthogonal cap has small measure, so the expected number of
    rejections is O(1); after ``cap`` consecutive rejections this raises.
    """
    if isinstance(seed, np.random.Generator):
        rng = seed
    elif isinstance(seed, SeedSpec):
        rng = seed.rng()
    else:
        rng = SeedSpec(master_seed=int(seed)).rng()
    for _ in range(cap):
        x = random_isotropic_init(n, rng)
        if not is_almost_orthogonal(x, x0, mu):
            return x
    raise RuntimeError(f"gave up after {cap} almost-orthogonal draws (n={n}, mu={mu})")


def _success_chunk(task) -> tuple[int, int, int, int, int]:
    """Run trials [lo, hi) of cell (n, m); returns counting aggregates."""
    n, m, lo, hi, master_seed, config = task
    successes = 0
    iter_sum = 0
    for trial in range(lo, hi):
        seed = SeedSpec(master_seed, n=n, m=m, trial_index=trial)
        try:
            problem = make_problem(n, m, seed)
            traj = run_ap(problem, config, seed=seed.with_labels(stream_tag="init"))
        except (SingularGramError, EmptyTruncationError) as err:
            logger.warning("trial (n=%d, m=%d, trial=%d) failed: %s", n, m, trial, err)
            continue
        if traj.verdict == VERDICT_SUCCESS:
            successes += 1
        iter_sum += traj.iterations_run
    return n, m, successes, iter_sum, hi - lo


def _stagnation_chunk(task) -> tuple[int, int, int, int, int]:
    """Probe instances [lo, hi) of cell (n, m); counts all-inits-succeed instances."""
    n, m, lo, hi, master_seed, config, inits = task
    no_stagnation = 0
    iter_sum = 0
    runs = 0
    for idx in range(lo, hi):
        seed = SeedSpec(master_seed, n=n, m=m, trial_index=idx)
        try:
            problem = make_problem(n, m, seed)
        except SingularGramError as err:
            logger.warning("instance (n=%d, m=%d, idx=%d) failed: %s", n, m, idx, err)
            continue
        all_succeeded = True
        for j in range(inits):
            init = sample_not_almost_orthogonal(
                n, problem.x0, seed.with_labels(stream_tag=f"init{j}"), mu=config.mu
            )
            traj = run_ap(problem, config, init=init)
            iter_sum += traj.iterations_run
            runs += 1
            if traj.verdict != VERDICT_SUCCESS:
                # One failing start already certifies a stagnation point; the
                # remaining starts cannot change the instance label.
                all_succeeded = False
                break
        if all_succeeded:
            no_stagnation += 1
    return n, m, no_stagnation, iter_sum, runs


def _map_tasks(fn, tasks: list, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def _chunk_ranges(total: int, chunk: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]


def _aggregate(kind: str, results: Iterable, master_seed: int, config_hash: str, t0: float,
               trial_counts: dict[tuple[int, int], int]) -> GridResult:
    successes: dict[tuple[int, int], int] = {}
    iter_sums: dict[tuple[int, int], int] = {}
    run_counts: dict[tuple[int, int], int] = {}
    for n, m, succ, iters, runs in results:
        key = (n, m)
        successes[key] = successes.get(key, 0) + succ
        iter_sums[key] = iter_sums.get(key, 0) + iters
        run_counts[key] = run_counts.get(key, 0) + runs
    cells = []
    for (n, m), trials in sorted(trial_counts.items()):
        runs = run_counts.get((n, m), 0)
        mean_iters = iter_sums.get((n, m), 0) / runs if runs else 0.0
        cells.append(CellResult(n, m, trials, successes.get((n, m), 0), mean_iters))
    return GridResult(kind, cells, master_seed, config_hash, time.time() - t0)


def run_success_grid(spec: GridSpec, threads: int = 1) -> GridResult:
    """Empirical success probability per (n, m) cell, ``spec.trials`` runs each."""
    t0 = time.time()
    chunk = max(1, min(25, -(-spec.trials // max(1, 4 * threads))))
    tasks = [
        (n, m, lo, hi, spec.master_seed, spec.config)
        for (n, m) in spec.cells()
        for lo, hi in _chunk_ranges(spec.trials, chunk)
    ]
    results = _map_tasks(_success_chunk, tasks, threads)
    counts = {cell: spec.trials for cell in spec.cells()}
    h = _config_hash(spec.config, {"trials": spec.trials, "kind": "success"})
    return _aggregate("success", results, spec.master_seed, h, t0, counts)


def probe_stagnation(spec: StagnationSpec, threads: int = 1) -> GridResult:
    """Per cell: fraction of instances on which every random start succeeds.

    An instance counts as free of stagnation points when all
    ``inits_per_instance`` not-almost-orthogonal random starts recover the
    signal; a single failing start certifies a stagnation point. In the
    result, ``trials`` is the instance count and ``mean_iterations``
    averages over the runs actually executed.
    """
    t0 = time.time()
    tasks = [
        (n, m, lo, hi, spec.master_seed, spec.config, spec.inits_per_instance)
        for (n, m) in spec.cells()
        for lo, hi in _chunk_ranges(spec.instances, 1)
    ]
    results = _map_tasks(_stagnation_chunk, tasks, threads)
    counts = {cell: spec.instances for cell in spec.cells()}
    h = _config_hash(
        spec.config,
        {"instances": spec.instances, "inits": spec.inits_per_instance, "kind": "no_stagnation"},
    )
    return _aggregate("no_stagnation", results, spec.master_seed, h, t0, counts)


class MnPoint(NamedTuple):
    n: int
    m_n: int | None  # None when the search range was exhausted without a crossing
    ratio: float | None  # m_n / n^2


def compute_mn_curve(
    n_values: Iterable[int],
    m_search_range: tuple[int | None, int],
    instances: int = 50,
    inits_per_instance: int = 200,
    threshold: float = 0.5,
    seed: int = 0,
    config: SolverConfig | None = None,
    threads: int = 1,
) -> list[MnPoint]:
    """Smallest m per n at which stagnation points become improbable.

    For each n, finds the smallest m such that the estimated probability
    that the instance has at least one stagnation point drops under
    ``threshold``: a coarse scan with step max(1, n^2/8) brackets the
    crossing, then bisection pins it. Each probe draws ``instances`` fresh
    instances. A point with ``m_n=None`` means the upper end of the search
    range was reached without a crossing.
    """
    config = config or SolverConfig()
    lo_bound, hi_bound = m_search_range
    out = []
    for n in sorted(set(int(v) for v in n_values)):
        lo = int(lo_bound) if lo_bound is not None else max(1, n)
        hi = int(hi_bound)
        cache: dict[int, float] = {}

        def crosses(m: int) -> bool:
            if m not in cache:
                spec = StagnationSpec(
                    n_values=(n,),
                    m_values=(m,),
                    instances=instances,
                    inits_per_instance=inits_per_instance,
                    master_seed=seed,
                    config=config,
                )
                p_no = probe_stagnation(spec, threads=threads).cells[0].probability
                cache[m] = p_no
                logger.info("mn_curve probe n=%d m=%d: P(no stagnation)=%.3f", n, m, p_no)
            return 1.0 - cache[m] < threshold

        step = max(1, n * n // 8)
        probes = list(range(lo, hi + 1, step))
        if probes[-1] != hi:
            probes.append(hi)
        bracket_lo = None
        bracket_hi = None
        for m in probes:
            if crosses(m):
                bracket_hi = m
                break
            bracket_lo = m
        if bracket_hi is None:
            logger.warning("mn_curve: no crossing for n=%d in m range [%d, %d]", n, lo, hi)
            out.append(MnPoint(n, None, None))
            continue
        if bracket_lo is not None:
            while bracket_hi - bracket_lo > 1:
                mid = (bracket_lo + bracket_hi) // 2
                if crosses(mid):
                    bracket_hi = mid
                else:
                    bracket_lo = mid
        out.append(MnPoint(n, bracket_hi, bracket_hi / (n * n)))
    return out


def mn_curve_to_csv(points: list[MnPoint]) -> str:
    lines = ["n,m_n,ratio"]
    for p in sorted(points):
        if p.m_n is None:
            lines.append(f"{p.n},unbounded,")
        else:
            lines.append(f"{p.n},{p.m_n},{p.ratio!r}")
    return "\n".join(lines) + "\n"


def validate_diff_phase(samples: int, seed: SeedSpec | int = 0) -> dict:
    """Check |phase(z0+z) - phase(z0)| <= 2*[|z| >= |z0|/6] + (6/5)|Im(z/z0)|.

    Samples (z0, z) pairs across magnitude scales spanning twelve orders,
    concentrating part of the budget at |z| near |z0|/6 (where the bound
    switches branches) and at z0 = 0 (where phase(0) = 1 applies). Any
    violation beyond 1e-12 slack fails the report.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if isinstance(seed, SeedSpec):
        rng = seed.rng()
    else:
        rng = SeedSpec(master_seed=int(seed), stream_tag="diff_phase").rng()

    def gaussian(k):
        return rng.standard_normal(k) + 1j * rng.standard_normal(k)

    n_boundary = samples // 4
    n_zero = samples // 20
    n_generic = samples - n_boundary - n_zero

    scale0 = 10.0 ** rng.uniform(-6, 6, n_generic)
    z0_g = gaussian(n_generic) * scale0
    rel = 10.0 ** rng.uniform(-8, 4, n_generic)
    z_g = gaussian(n_generic) * (np.abs(z0_g) * rel / np.sqrt(2.0))

    # |z| within a factor (1 +- 2e-2) of |z0|/6, uniformly random phases.
    z0_b = gaussian(n_boundary) * 10.0 ** rng.uniform(-3, 3, n_boundary)
    wobble = 1.0 + rng.uniform(-2e-2, 2e-2, n_boundary)
    z_b = (np.abs(z0_b) / 6.0) * wobble * np.exp(2j * np.pi * rng.uniform(0, 1, n_boundary))

    z0 = np.concatenate([z0_g, z0_b, np.zeros(n_zero, dtype=np.complex128)])
    z = np.concatenate([z_g, z_b, gaussian(n_zero)])

    lhs = np.abs(phase_vec(z0 + z) - phase_vec(z0))
    nonzero = z0 != 0
    rhs = np.full(z0.shape, 2.0)
    ratio = np.divide(z, z0, out=np.zeros_like(z), where=nonzero)
    rhs[nonzero] = 2.0 * (np.abs(z[nonzero]) >= np.abs(z0[nonzero]) / 6.0) + 1.2 * np.abs(
        ratio[nonzero].imag
    )
    excess = lhs - rhs
    violations = int(np.sum(excess > 1e-12))
    return {
        "lemma": "diff-phase",
        "samples": int(samples),
        "violations": violations,
        "max_excess": float(excess.max()),
        "passed": violations == 0,
    }


def validate_min_f(
    t_grid: Iterable[float] = DEFAULT_T_GRID,
    samples_per_t: int = 10**6,
    seed: SeedSpec | int = 0,
) -> dict:
    """Monte Carlo check that f(t) sqrt(1+t^2) stays above 1 with 3-sigma margin.

    f(t) = E[conj(Z1) |Z1| phase(Z1 + t Z2)] over independent complex
    Gaussians with unit variance. Also checks that the estimate is
    real-valued (imaginary part within 3 standard errors of zero) and, when
    the grid contains a t >= 10, that t * f(t) is 3-sigma-compatible with
    its large-t limit 3*pi/8.
    """
    t_grid = tuple(float(t) for t in t_grid)
    if any(t < MIN_T for t in t_grid):
        raise ValueError(f"t values below {MIN_T} are excluded (margin vanishes near 0)")
    if samples_per_t < 2:
        raise ValueError("samples_per_t must be >= 2")
    base = seed if isinstance(seed, SeedSpec) else SeedSpec(master_seed=int(seed))
    tail_limit = 3.0 * np.pi / 8.0
    entries = []
    for idx, t in enumerate(t_grid):
        rng = base.with_labels(trial_index=idx, stream_tag="min_f").rng()
        z1 = (rng.standard_normal(samples_per_t) + 1j * rng.standard_normal(samples_per_t)) / np.sqrt(2.0)
        z2 = (rng.standard_normal(samples_per_t) + 1j * rng.standard_normal(samples_per_t)) / np.sqrt(2.0)
        s = np.conj(z1) * np.abs(z1) * phase_vec(z1 + t * z2)
        est_re = float(s.real.mean())
        est_im = float(s.imag.mean())
        se_re = float(s.real.std(ddof=1) / np.sqrt(samples_per_t))
        se_im = float(s.imag.std(ddof=1) / np.sqrt(samples_per_t))
        root = np.sqrt(1.0 + t * t)
        excess_sigmas = (est_re * root - 1.0) / (se_re * root)
        entries.append(
            {
                "t": t,
                "estimate_re": est_re,
                "estimate_im": est_im,
                "stderr_re": se_re,
                "stderr_im": se_im,
                "scaled": est_re * root,
                "excess_sigmas": float(excess_sigmas),
                "excess_pass": bool(excess_sigmas > 3.0),
                "imag_pass": bool(abs(est_im) <= 3.0 * se_im),
            }
        )
    tail = None
    t_max = max(t_grid)
    if t_max >= 10.0:
        e = next(x for x in entries if x["t"] == t_max)
        sigmas = (e["estimate_re"] * t_max - tail_limit) / (e["stderr_re"] * t_max)
        tail = {
            "t": t_max,
            "t_times_estimate": e["estimate_re"] * t_max,
            "limit": tail_limit,
            "sigmas_from_limit": float(sigmas),
            "pass": bool(abs(sigmas) <= 3.0),
        }
    passed = all(e["excess_pass"] and e["imag_pass"] for e in entries) and (
        tail is None or tail["pass"]
    )
    return {
        "lemma": "min-f",
        "samples_per_t": int(samples_per_t),
        "entries": entries,
        "tail": tail,
        "passed": passed,
    }
