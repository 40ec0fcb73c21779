"""Phase retrieval problem instances and deterministic seeding.

Measurement model: an m x n matrix with i.i.d. complex Gaussian entries,
real and imaginary parts each N(0, 1/2), applied to a ground-truth signal;
only the moduli of the m inner products are observed.

Seed derivation recipe (stable across versions): the labels
``(master_seed, n, m, trial_index, stream_tag)`` are mixed by feeding the
entropy tuple ``(master_seed, n, m, trial_index, tag64)`` to
``numpy.random.SeedSequence``, where ``tag64`` is the first 8 bytes
(little-endian) of SHA-256 of the UTF-8 tag. Each SeedSpec therefore names
one reproducible PCG64 stream, independent of scheduling or thread count.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from prap.linalg import LeastSquaresSolver, modulus_vec

_U64 = (1 << 64) - 1


def _tag64(tag: str) -> int:
    return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "little")


@dataclass(frozen=True)
class SeedSpec:
    """Names one reproducible random stream via (master_seed, labels)."""

    master_seed: int
    n: int = 0
    m: int = 0
    trial_index: int = 0
    stream_tag: str = ""

    def with_labels(self, **labels) -> "SeedSpec":
        """Copy of this spec with some labels replaced."""
        return replace(self, **labels)

    def seed_sequence(self) -> np.random.SeedSequence:
        entropy = (
            self.master_seed & _U64,
            self.n & _U64,
            self.m & _U64,
            self.trial_index & _U64,
            _tag64(self.stream_tag),
        )
        return np.random.SeedSequence(entropy)

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))


def _as_seedspec(seed: SeedSpec | int) -> SeedSpec:
    if isinstance(seed, SeedSpec):
        return seed
    return SeedSpec(master_seed=int(seed))


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    # Real and imaginary parts each N(0, 1/2), so E|entry|^2 = 1.
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_gaussian_matrix(m: int, n: int, seed: SeedSpec | int) -> np.ndarray:
    """m x n matrix of i.i.d. complex Gaussian entries, deterministic in seed."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    return _complex_gaussian(_as_seedspec(seed).rng(), (m, n))


def sample_signal(n: int, seed: SeedSpec | int, normalize: bool = True) -> np.ndarray:
    """Random complex Gaussian signal of length n, unit norm by default."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = _complex_gaussian(_as_seedspec(seed).rng(), n)
    if normalize:
        x = x / np.linalg.norm(x)
    return x


def measure(A: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """Phaseless measurements |A x0|; real nonnegative, length m."""
    A = np.asarray(A, dtype=np.complex128)
    x0 = np.asarray(x0, dtype=np.complex128)
    if x0.shape != (A.shape[1],):
        raise ValueError(f"signal length {x0.shape} does not match n={A.shape[1]}")
    return modulus_vec(A @ x0)


class Problem:
    """One phase retrieval instance: matrix A, measurements b, optional truth.

    Ownership of the least-squares machinery lives here; the solver caches
    its factorization once at construction. Instances are immutable and
    safe to share across threads.

    ``uniqueness_warning`` is set when m < 4n - 4, below the generic
    uniqueness threshold: reconstruction may be ambiguous even in exact
    arithmetic.
    """

    def __init__(
        self,
        A: np.ndarray,
        b: np.ndarray | None = None,
        x0: np.ndarray | None = None,
        method: str = "factor",
        cg_tol: float = 1e-12,
        max_cg_iters: int | None = None,
    ):
        A = np.ascontiguousarray(A, dtype=np.complex128)
        if A.ndim != 2:
            raise ValueError("A must be a 2-D matrix")
        m, n = A.shape
        if x0 is not None:
            x0 = np.asarray(x0, dtype=np.complex128)
            if x0.shape != (n,):
                raise ValueError(f"x0 must have length n={n}")
        if b is None:
            if x0 is None:
                raise ValueError("need b, or x0 to compute b from")
            b = measure(A, x0)
        else:
            b = np.asarray(b, dtype=np.float64)
            if b.shape != (m,):
                raise ValueError(f"b must have length m={m}")
            if np.any(b < 0):
                raise ValueError("b entries must be nonnegative")
            if x0 is not None:
                expected = measure(A, x0)
                tol = 4.0 * np.finfo(np.float64).eps * max(1.0, float(expected.max()))
                if np.max(np.abs(b - expected)) > tol:
                    raise ValueError("b is inconsistent with |A x0|")
        self.A = A
        self.b = b
        self.x0 = x0
        self.solver = LeastSquaresSolver(A, method=method, cg_tol=cg_tol, max_cg_iters=max_cg_iters)
        self.uniqueness_warning = m < 4 * n - 4

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def __repr__(self) -> str:
        truth = "known" if self.x0 is not None else "unknown"
        return f"Problem(m={self.m}, n={self.n}, x0 {truth})"


def make_problem(
    n: int,
    m: int,
    seed: SeedSpec | int,
    normalize_signal: bool = True,
    method: str = "factor",
) -> Problem:
    """Sample a fresh instance: Gaussian A, Gaussian x0, b = |A x0|."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    base = _as_seedspec(seed).with_labels(n=n, m=m)
    A = sample_gaussian_matrix(m, n, base.with_labels(stream_tag="matrix"))
    x0 = sample_signal(n, base.with_labels(stream_tag="signal"), normalize=normalize_signal)
    return Problem(A, x0=x0, method=method)


def _interleave(z: np.ndarray) -> list[float]:
    out = np.empty(2 * z.size, dtype=np.float64)
    out[0::2] = z.real.ravel()
    out[1::2] = z.imag.ravel()
    return out.tolist()


def _deinterleave(values, shape) -> np.ndarray:
    flat = np.asarray(values, dtype=np.float64)
    return (flat[0::2] + 1j * flat[1::2]).reshape(shape)


def problem_to_json(problem: Problem) -> dict:
    """JSON-ready dict; matrix stored as interleaved re/im doubles, row-major."""
    return {
        "format": "prap-problem-v1",
        "m": problem.m,
        "n": problem.n,
        "matrix_re_im": _interleave(problem.A),
        "b": problem.b.tolist(),
        "signal_re_im": _interleave(problem.x0) if problem.x0 is not None else None,
        "solver_method": problem.solver.method,
    }


def problem_from_json(data: dict) -> Problem:
    """Inverse of problem_to_json; exact (doubles round-trip through JSON)."""
    if data.get("format") != "prap-problem-v1":
        raise ValueError(f"unsupported container format: {data.get('format')!r}")
    m, n = int(data["m"]), int(data["n"])
    A = _deinterleave(data["matrix_re_im"], (m, n))
    x0 = None
    if data.get("signal_re_im") is not None:
        x0 = _deinterleave(data["signal_re_im"], (n,))
    b = np.asarray(data["b"], dtype=np.float64)
    return Problem(A, b=b, x0=x0, method=data.get("solver_method", "factor"))
