"""Alternating projections for phase retrieval.

One iteration maps z to the least-squares solution of
A w = b * phase(A z): project the current image-domain point onto the
modulus constraint set, then back onto the range of A. Runs either start
from the truncated spectral initializer (principal eigenvector of a
weighted, truncated covariance built from the measurements), from a random
point on the unit sphere, or from a caller-provided vector.

Success is declared against the ground truth at relative error below
``success_tol`` (the error metric is distance up to a global phase).
Stagnation is detected as a fixed point of the image-domain map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from prap.linalg import PowerIterationResult, dist_up_to_phase, phase_vec, power_iteration
from prap.model import Problem, SeedSpec, _as_seedspec

VERDICT_SUCCESS = "success"
VERDICT_STALLED = "stalled"
VERDICT_BUDGET = "budget_exhausted"

INIT_SPECTRAL = "truncated_spectral"
INIT_RANDOM = "random_isotropic"
INIT_PROVIDED = "provided"

# Entries of the image-domain iterate below this relative size are flagged in
# the stagnation test: the fixed-point property is phase-ambiguous at zeros.
ZERO_ENTRY_TOL = 1e-8


class EmptyTruncationError(RuntimeError):
    """All truncation weights are zero (degenerate measurements)."""


@dataclass(frozen=True)
class SolverConfig:
    """Iteration limits, tolerances, and initialization mode for run_ap."""

    max_iters: int = 1000
    success_tol: float = 1e-5
    stall_tol: float = 1e-12
    init_mode: str = INIT_SPECTRAL
    power_iters: int = 200
    power_tol: float = 1e-9
    mu: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.success_tol < 1.0):
            raise ValueError("success_tol must be in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.init_mode not in (INIT_SPECTRAL, INIT_RANDOM, INIT_PROVIDED):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")


@dataclass
class Trajectory:
    """Record of one alternating projections run.

    ``rel_errors`` and ``residuals`` have one entry per iterate including the
    initial one, so their length is ``iterations_run + 1``. ``rel_errors`` is
    None when the problem carries no ground truth.
    """

    verdict: str
    iterations_run: int
    rel_errors: list[float] | None
    residuals: list[float]
    final_iterate: np.ndarray
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "iterations_run": self.iterations_run,
            "rel_errors": self.rel_errors,
            "residuals": self.residuals,
            "flags": self.flags,
        }


def ap_step(problem: Problem, z: np.ndarray) -> np.ndarray:
    """One alternating projections update of the signal-domain iterate."""
    return problem.solver.solve(problem.b * phase_vec(problem.A @ z))


def _spectral_power(
    problem: Problem,
    power_iters: int = 200,
    power_tol: float = 1e-9,
    seed: SeedSpec | int | np.random.Generator = 0,
) -> PowerIterationResult:
    b2 = problem.b * problem.b
    threshold = (9.0 / problem.m) * float(b2.sum())
    weights = np.where(b2 <= threshold, b2, 0.0)
    if not np.any(weights > 0):
        raise EmptyTruncationError("empty truncation")
    A = problem.A
    m = problem.m

    def apply(v: np.ndarray) -> np.ndarray:
        return A.conj().T @ (weights * (A @ v)) / m

    if isinstance(seed, SeedSpec):
        seed = seed.rng()
    return power_iteration(apply, problem.n, iters=power_iters, tol=power_tol, seed=seed)


def truncated_spectral_init(
    problem: Problem,
    power_iters: int = 200,
    power_tol: float = 1e-9,
    seed: SeedSpec | int | np.random.Generator = 0,
) -> np.ndarray:
    """Unit-norm principal eigenvector of the truncated measurement covariance.

    The matrix is (1/m) sum_i b_i^2 a_i a_i^* over the rows whose squared
    measurement does not exceed 9/m times the total energy; its action is
    applied matrix-free, so the cost per power iteration is two mat-vecs.
    Uses only b, not the ground truth.
    """
    return _spectral_power(problem, power_iters, power_tol, seed).vector


def random_isotropic_init(
    n: int, seed: SeedSpec | int | np.random.Generator = 0
) -> np.ndarray:
    """Uniform random point on the complex unit sphere in dimension n."""
    if isinstance(seed, np.random.Generator):
        rng = seed
    else:
        rng = _as_seedspec(seed).rng()
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return x / np.linalg.norm(x)


def is_almost_orthogonal(x: np.ndarray, x0: np.ndarray, mu: float = 1.0) -> bool:
    """True iff |<x0, x>| < mu ||x0|| ||x|| / sqrt(n). Ties are not almost orthogonal."""
    x = np.asarray(x, dtype=np.complex128)
    x0 = np.asarray(x0, dtype=np.complex128)
    if x.shape != x0.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x0.shape}")
    norm_x0 = np.linalg.norm(x0)
    if norm_x0 == 0.0:
        raise ValueError("x0 must be nonzero")
    n = x0.shape[0]
    return bool(abs(np.vdot(x0, x)) < mu * norm_x0 * np.linalg.norm(x) / np.sqrt(n))


def _resolve_init(
    problem: Problem,
    config: SolverConfig,
    init: np.ndarray | str | None,
    seed: SeedSpec | int | np.random.Generator,
    flags: list[str],
) -> np.ndarray:
    mode = config.init_mode
    if isinstance(init, str):
        mode = init
        init = None
    elif init is not None:
        mode = INIT_PROVIDED
    if mode == INIT_PROVIDED:
        if init is None:
            raise ValueError("init_mode 'provided' requires an init vector")
        return np.asarray(init, dtype=np.complex128)
    if mode == INIT_RANDOM:
        return random_isotropic_init(problem.n, seed)
    if mode == INIT_SPECTRAL:
        result = _spectral_power(problem, config.power_iters, config.power_tol, seed)
        if not result.converged:
            flags.append("spectral_init_not_converged")
        # Rescale to the measurement-energy estimate of ||x0||. The first AP
        # step is invariant to positive scaling; this only makes the t=0
        # relative error meaningful.
        scale = np.sqrt(float(np.mean(problem.b * problem.b)))
        return result.vector * (scale if scale > 0 else 1.0)
    raise ValueError(f"unknown init mode {mode!r}")


def run_ap(
    problem: Problem,
    config: SolverConfig | None = None,
    init: np.ndarray | str | None = None,
    seed: SeedSpec | int | np.random.Generator = 0,
) -> Trajectory:
    """Run alternating projections until success, stall, or budget.

    Verdicts: ``success`` when the relative error against the ground truth
    drops below ``config.success_tol`` (needs x0); ``stalled`` when the
    successive-iterate change falls below ``config.stall_tol`` relative to
    the iterate norm; ``budget_exhausted`` at ``config.max_iters``.
    """
    if config is None:
        config = SolverConfig()
    flags: list[str] = []
    z = _resolve_init(problem, config, init, seed, flags)
    if z.shape != (problem.n,):
        raise ValueError(f"init must have length n={problem.n}")

    A, b = problem.A, problem.b
    norm_b = float(np.linalg.norm(b)) or 1.0
    x0 = problem.x0
    norm_x0 = float(np.linalg.norm(x0)) if x0 is not None else 0.0

    rel_errors: list[float] | None = [] if x0 is not None else None
    residuals: list[float] = []

    def record(zt: np.ndarray, Azt: np.ndarray) -> float:
        residuals.append(float(np.linalg.norm(np.abs(Azt) - b)) / norm_b)
        if rel_errors is None:
            return np.inf
        rel = dist_up_to_phase(zt, x0) / norm_x0
        rel_errors.append(rel)
        return rel

    Az = A @ z
    rel = record(z, Az)
    if rel < config.success_tol:
        return Trajectory(VERDICT_SUCCESS, 0, rel_errors, residuals, z, flags)

    verdict = VERDICT_BUDGET
    iterations = config.max_iters
    for t in range(1, config.max_iters + 1):
        z_new = problem.solver.solve(b * phase_vec(Az))
        Az_new = A @ z_new
        rel = record(z_new, Az_new)
        if rel < config.success_tol:
            verdict, iterations = VERDICT_SUCCESS, t
            z = z_new
            break
        if dist_up_to_phase(z_new, z) < config.stall_tol * np.linalg.norm(z_new):
            verdict, iterations = VERDICT_STALLED, t
            z = z_new
            break
        z, Az = z_new, Az_new
    return Trajectory(verdict, iterations, rel_errors, residuals, z, flags)


@dataclass(frozen=True)
class StagnationCheck:
    """Result of the image-domain fixed-point test at a signal-domain point."""

    is_stagnation: bool
    residual: float
    near_zero: np.ndarray  # per-entry flags: |A z| small, phase ambiguous there

    def __bool__(self) -> bool:
        return self.is_stagnation


def is_stagnation_point(
    problem: Problem,
    z: np.ndarray,
    tol: float = 1e-6,
    zero_entry_tol: float = ZERO_ENTRY_TOL,
) -> StagnationCheck:
    """Test whether y = A z is a fixed point of y -> AA^dagger(b * phase(y)).

    The residual is ||A ap_step(z) - A z|| / ||b||. Entries of A z with
    modulus below ``zero_entry_tol * ||b|| / sqrt(m)`` are flagged: at exact
    zeros the fixed-point property holds for some phase choice rather than
    the phase(0) = 1 convention, which is still the one used here.
    """
    z = np.asarray(z, dtype=np.complex128)
    if z.shape != (problem.n,):
        raise ValueError(f"expected vector of length n={problem.n}")
    Az = problem.A @ z
    z_next = problem.solver.solve(problem.b * phase_vec(Az))
    norm_b = float(np.linalg.norm(problem.b)) or 1.0
    residual = float(np.linalg.norm(problem.A @ z_next - Az)) / norm_b
    near_zero = np.abs(Az) < zero_entry_tol * norm_b / np.sqrt(problem.m)
    return StagnationCheck(residual <= tol, residual, near_zero)
