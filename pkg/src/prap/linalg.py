"""Complex dense linear algebra kernel.

Phase maps with the ``phase(0) = 1`` convention, the distance between
complex vectors modulo a global phase factor, least-squares projection onto
the range of a tall matrix (cached dense factorization or matrix-free
conjugate gradient), and power iteration for principal eigenvectors.

All functions accept and return plain numpy arrays (``complex128`` unless
stated otherwise) and are pure; solver objects are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve


class SingularGramError(RuntimeError):
    """The normal-equations matrix A*A is numerically singular.

    Only possible for m < n or a degenerate measurement matrix.
    """


def phase_scalar(z: complex) -> complex:
    """Return z/|z|, or 1 when z == 0. The result has modulus 1."""
    z = complex(z)
    if z == 0:
        return complex(1.0)
    return z / abs(z)


def phase_vec(z: np.ndarray) -> np.ndarray:
    """Elementwise phase of a complex vector, with phase(0) = 1."""
    z = np.asarray(z, dtype=np.complex128)
    a = np.abs(z)
    return np.divide(z, a, out=np.ones_like(z), where=a > 0)


def modulus_vec(z: np.ndarray) -> np.ndarray:
    """Elementwise modulus; real nonnegative float64 array."""
    return np.abs(np.asarray(z, dtype=np.complex128))


def dist_up_to_phase(x: np.ndarray, y: np.ndarray) -> float:
    """Distance between x and y minimized over a global phase rotation.

    Equals inf over phi of ||e^{i phi} x - y||, algebraically
    sqrt(||x||^2 + ||y||^2 - 2 |<x, y>|). The optimal rotation is the phase
    of <x, y>, so the distance is evaluated as ||phase(<x, y>) x - y||:
    unlike the sqrt form, this does not cancel catastrophically near zero
    (dist(x, x) is exactly 0), which the stall and convergence thresholds
    downstream rely on.
    """
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    rot = phase_scalar(np.vdot(x, y))
    return float(np.linalg.norm(rot * x - y))


class LeastSquaresSolver:
    """Minimum-norm-residual solves against a fixed m x n matrix A.

    ``solve(v)`` returns the w minimizing ||A w - v||; for full column rank
    this is the pseudo-inverse applied to v. Two methods:

    - ``"factor"`` (default): Cholesky-factor the n x n Gram matrix A*A once
      and cache the resulting dense pseudo-inverse application matrix, so
      each solve is a single mat-vec. Cheap at desk scale (n up to a few
      hundred) and amortized over many iterations.
    - ``"cg"``: matrix-free conjugate gradient on the normal equations
      A*A w = A*v, stopped at relative residual ``cg_tol``.

    Raises SingularGramError when the Gram matrix is numerically singular
    (factorization failure, or CG breakdown / non-convergence).
    """

    def __init__(
        self,
        A: np.ndarray,
        method: str = "factor",
        cg_tol: float = 1e-12,
        max_cg_iters: int | None = None,
    ):
        A = np.ascontiguousarray(A, dtype=np.complex128)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise ValueError("A must be a 2-D matrix with m, n >= 1")
        self.A = A
        self.m, self.n = A.shape
        if method not in ("factor", "cg"):
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        self.cg_tol = float(cg_tol)
        self.max_cg_iters = int(max_cg_iters) if max_cg_iters else 4 * self.n
        self._pinv: np.ndarray | None = None
        if method == "factor":
            gram = A.conj().T @ A
            try:
                chol = cho_factor(gram)
            except LinAlgError as exc:
                raise SingularGramError(
                    "Gram matrix A*A is numerically singular (m < n or degenerate A)"
                ) from exc
            # Write-once cache: A^dagger = (A*A)^{-1} A*, derived from the factorization.
            self._pinv = cho_solve(chol, A.conj().T)

    def solve(self, v: np.ndarray) -> np.ndarray:
        """Return w (length n) minimizing ||A w - v|| for v of length m."""
        v = np.asarray(v, dtype=np.complex128)
        if v.shape != (self.m,):
            raise ValueError(f"expected vector of length {self.m}, got {v.shape}")
        if self._pinv is not None:
            return self._pinv @ v
        return self._solve_cg(v)

    def project(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection of v onto Range(A): A @ solve(v)."""
        return self.A @ self.solve(v)

    def _solve_cg(self, v: np.ndarray) -> np.ndarray:
        A = self.A
        rhs = A.conj().T @ v
        rhs_norm = np.linalg.norm(rhs)
        if rhs_norm == 0.0:
            return np.zeros(self.n, dtype=np.complex128)
        w = np.zeros(self.n, dtype=np.complex128)
        r = rhs.copy()
        p = r.copy()
        rs = np.vdot(r, r).real
        for _ in range(self.max_cg_iters):
            gp = A.conj().T @ (A @ p)
            pgp = np.vdot(p, gp).real
            if pgp <= 0.0:
                raise SingularGramError("conjugate gradient breakdown: A*A not positive definite")
            alpha = rs / pgp
            w += alpha * p
            r -= alpha * gp
            rs_new = np.vdot(r, r).real
            if np.sqrt(rs_new) <= self.cg_tol * rhs_norm:
                return w
            p = r + (rs_new / rs) * p
            rs = rs_new
        raise SingularGramError(
            f"conjugate gradient did not reach rtol={self.cg_tol:g} "
            f"in {self.max_cg_iters} iterations; A*A may be ill-conditioned"
        )


def least_squares_project(solver: LeastSquaresSolver, v: np.ndarray) -> np.ndarray:
    """Least-squares coefficients w with A*A w = A*v, up to solver tolerance.

    A @ w is then the orthogonal projection of v onto Range(A).
    """
    return solver.solve(v)


class PowerIterationResult(NamedTuple):
    vector: np.ndarray  # unit norm
    value: float  # final Rayleigh quotient
    converged: bool
    iterations: int


def power_iteration(
    apply: Callable[[np.ndarray], np.ndarray],
    dim: int,
    iters: int = 200,
    tol: float = 1e-9,
    seed: int | np.random.Generator = 0,
) -> PowerIterationResult:
    """Principal eigenpair of a Hermitian PSD operator given by its action.

    Starts from a random complex Gaussian direction and iterates
    v <- apply(v)/||apply(v)||, stopping early once successive unit iterates
    differ by less than ``tol`` in distance up to phase. At budget
    exhaustion the best iterate is returned with ``converged=False``.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    converged = False
    k = 0
    for k in range(1, iters + 1):
        w = apply(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # v lies in the kernel: it is an exact eigenvector for eigenvalue 0.
            return PowerIterationResult(v, 0.0, True, k)
        w = w / nw
        if dist_up_to_phase(w, v) < tol:
            v = w
            converged = True
            break
        v = w
    value = float(np.vdot(v, apply(v)).real)
    return PowerIterationResult(v, value, converged, k)
