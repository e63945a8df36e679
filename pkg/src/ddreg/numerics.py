"""Dense real-matrix primitives shared by the rest of the toolkit.

Everything operates on plain float64 ``numpy`` arrays.  Rank decisions across
the whole package route through :func:`rank_with_tol` so a single relative
tolerance governs them all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Single rank-tolerance knob for the whole toolkit (relative to the largest
# singular value of the matrix under test).
DEFAULT_RANK_RTOL = 1e-8

# Two spectra count as overlapping when some pair of eigenvalues is closer
# than this (absolute distance in the complex plane).
SPECTRUM_GAP_TOL = 1e-9


def as_matrix(a, name: str = "matrix", square: bool = False) -> np.ndarray:
    """Coerce ``a`` to a 2-D float64 array, rejecting NaN/Inf entries."""
    M = np.asarray(a, dtype=float)
    if M.ndim == 1:
        M = M.reshape(1, -1)
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if M.size and not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    if square and M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    return M


def as_vector(a, name: str = "vector", dim: int | None = None) -> np.ndarray:
    """Coerce ``a`` to a 1-D float64 array, rejecting NaN/Inf entries."""
    v = np.asarray(a, dtype=float).reshape(-1)
    if v.size and not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    if dim is not None and v.size != dim:
        raise ValueError(f"{name} must have length {dim}, got {v.size}")
    return v


def rank_with_tol(M, rel_tol: float = DEFAULT_RANK_RTOL) -> int:
    """Numerical rank: number of singular values above ``rel_tol * sigma_max``.

    The zero matrix has rank 0.  An empty matrix is rejected.
    """
    M = as_matrix(M, "rank input")
    if M.size == 0:
        raise ValueError("empty input")
    if rel_tol <= 0:
        raise ValueError(f"rel_tol must be positive, got {rel_tol}")
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


@dataclass
class PolynomialCoeffs:
    """Monic annihilating polynomial ``c[0] + c[1] x + ... + x^degree``.

    ``coeffs`` holds the non-leading coefficients ``c[0] .. c[degree-1]``;
    the leading coefficient is implicitly 1.
    """

    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = as_vector(self.coeffs, "coeffs", dim=self.degree)
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")

    def eval_matrix(self, M) -> np.ndarray:
        """Evaluate the monic polynomial at a square matrix (Horner)."""
        M = as_matrix(M, "polynomial argument", square=True)
        eye = np.eye(M.shape[0])
        R = eye.copy()
        for c in self.coeffs[::-1]:
            R = R @ M + c * eye
        return R

    def eval_scalar(self, z: complex) -> complex:
        acc = 1.0 + 0.0j
        for c in self.coeffs[::-1]:
            acc = acc * z + c
        return acc


def minimal_polynomial(S, tol: float = 1e-8) -> PolynomialCoeffs:
    """Lowest-degree monic polynomial annihilating a square matrix.

    Found by an incremental Krylov test on vectorized powers: the smallest
    ``d`` such that ``vec(S^d)`` lies, within ``tol`` relative residual, in
    the span of ``vec(S^0) .. vec(S^(d-1))``.  ``d = n`` always succeeds.
    """
    S = as_matrix(S, "S", square=True)
    n = S.shape[0]
    if n == 0:
        raise ValueError("empty input")
    power = np.eye(n)
    basis = [power.ravel()]
    for d in range(1, n + 1):
        power = power @ S
        target = power.ravel()
        K = np.column_stack(basis)
        c, *_ = np.linalg.lstsq(K, target, rcond=None)
        resid = np.linalg.norm(K @ c - target)
        if resid <= tol * max(1.0, np.linalg.norm(target)) or d == n:
            return PolynomialCoeffs(degree=d, coeffs=-c)
        basis.append(target)
    raise AssertionError("unreachable: degree n always annihilates")


def spectral_radius(M) -> float:
    """Maximum eigenvalue modulus of a square matrix."""
    M = as_matrix(M, "M", square=True)
    if M.size == 0:
        raise ValueError("empty input")
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def spectra_disjoint(A, S, gap_tol: float = SPECTRUM_GAP_TOL) -> bool:
    """True when every eigenvalue pair of A and S is further apart than gap_tol."""
    la = np.linalg.eigvals(as_matrix(A, "A", square=True))
    ls = np.linalg.eigvals(as_matrix(S, "S", square=True))
    gap = np.min(np.abs(la[:, None] - ls[None, :]))
    return bool(gap > gap_tol)


def solve_sylvester(A, S, Q) -> np.ndarray:
    """Solve ``A @ P - P @ S = Q`` for P, requiring disjoint spectra.

    The residual is verified against ``1e-8 * (|A| + |S|) * |P| + 1e-12``
    (Frobenius norms); a violation indicates numerical breakdown.
    """
    A = as_matrix(A, "A", square=True)
    S = as_matrix(S, "S", square=True)
    Q = as_matrix(Q, "Q")
    if Q.shape != (A.shape[0], S.shape[0]):
        raise ValueError(
            f"Q must be {A.shape[0]}x{S.shape[0]}, got {Q.shape[0]}x{Q.shape[1]}"
        )
    if not spectra_disjoint(A, S):
        raise ValueError("resonant spectra")
    P = scipy.linalg.solve_sylvester(A, -S, Q)
    resid = np.linalg.norm(A @ P - P @ S - Q)
    bound = 1e-8 * (np.linalg.norm(A) + np.linalg.norm(S)) * np.linalg.norm(P) + 1e-12
    if resid > bound:
        raise RuntimeError(
            f"Sylvester solve residual {resid:.3e} exceeds bound {bound:.3e}"
        )
    return P


def binomial_ext(p: int, q: int) -> int:
    """Binomial coefficient extended by the convention C(p, q) = 0 for q < 0.

    Requires ``p >= q`` and ``p >= 0``; other inputs are outside the
    convention's domain.
    """
    p = int(p)
    q = int(q)
    if p < 0 or p < q:
        raise ValueError("out of convention domain")
    if q < 0:
        return 0
    return math.comb(p, q)
