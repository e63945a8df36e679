"""Known regressors that factor the hidden exosignal data block.

The exosignal stack W0 = [w(ell) ... w(T)] always factors as
``(unknown coefficient) @ (known regressor)``.  Two constructions are
available: one from the declared or detected Jordan structure of the
exosystem map (binomially weighted powers / cosine-sine pairs), and a Krylov
one from a user-supplied cyclic vector.  A greedy row reduction turns either
regressor into a full-row-rank matrix for the design program.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import as_matrix, as_vector, binomial_ext, minimal_polynomial, rank_with_tol
from .plant import UNIT_CIRCLE_SLACK, ExoMatrix

DEFAULT_REDUCE_TOL = 1e-8


@dataclass
class JordanSpec:
    """Jordan structure of the exosystem map.

    ``real_blocks`` holds (eigenvalue, block size) pairs; ``complex_blocks``
    holds (modulus, angle, block size) triples with the angle in (0, pi),
    conjugate blocks implicit.  Block dimensions must add up to the exosystem
    dimension: sum of real sizes plus twice the sum of complex sizes.
    """

    real_blocks: list[tuple[float, int]] = field(default_factory=list)
    complex_blocks: list[tuple[float, float, int]] = field(default_factory=list)

    def __post_init__(self):
        self.real_blocks = [(float(lam), int(k)) for lam, k in self.real_blocks]
        self.complex_blocks = [
            (float(rho), float(theta), int(k)) for rho, theta, k in self.complex_blocks
        ]
        for lam, k in self.real_blocks:
            if k < 1:
                raise ValueError(f"block size must be >= 1, got {k}")
            if abs(lam) < 1.0 - UNIT_CIRCLE_SLACK:
                raise ValueError("exosystem eigenvalue inside unit circle")
        for rho, theta, k in self.complex_blocks:
            if k < 1:
                raise ValueError(f"block size must be >= 1, got {k}")
            if rho < 1.0 - UNIT_CIRCLE_SLACK:
                raise ValueError("exosystem eigenvalue inside unit circle")
            if not (0.0 < theta < np.pi):
                raise ValueError(f"complex-block angle must lie in (0, pi), got {theta}")

    @property
    def n_w(self) -> int:
        return sum(k for _, k in self.real_blocks) + 2 * sum(
            k for _, _, k in self.complex_blocks
        )

    def eigenvalues(self) -> np.ndarray:
        """Implied spectrum, with multiplicity."""
        eigs = []
        for lam, k in self.real_blocks:
            eigs.extend([complex(lam, 0.0)] * k)
        for rho, theta, k in self.complex_blocks:
            eigs.extend([rho * np.exp(1j * theta)] * k)
            eigs.extend([rho * np.exp(-1j * theta)] * k)
        return np.array(eigs)

    def minimal_degree(self) -> int:
        """Degree of the minimal polynomial implied by the block structure."""
        largest: dict[complex, int] = {}
        for lam, k in self.real_blocks:
            key = complex(round(lam, 9), 0.0)
            largest[key] = max(largest.get(key, 0), k)
        degree = sum(largest.values())
        largest_c: dict[complex, int] = {}
        for rho, theta, k in self.complex_blocks:
            key = complex(round(rho, 9), round(theta, 9))
            largest_c[key] = max(largest_c.get(key, 0), k)
        return degree + 2 * sum(largest_c.values())


def _complex_rank(M: np.ndarray, rel_tol: float) -> int:
    """Rank at relative tolerance for a possibly complex matrix."""
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def _cluster(values: np.ndarray, radius: float) -> list[tuple[complex, int]]:
    """Greedy clustering of complex values at the given radius."""
    remaining = list(values)
    clusters = []
    while remaining:
        seed = remaining.pop(0)
        members = [seed]
        rest = []
        for v in remaining:
            if abs(v - seed) <= radius:
                members.append(v)
            else:
                rest.append(v)
        remaining = rest
        clusters.append((np.mean(members), len(members)))
    return clusters


def analyze_exosystem(
    exo: ExoMatrix,
    declared: JordanSpec | None = None,
    tol: float = 1e-8,
) -> JordanSpec:
    """Jordan structure of the exosystem map.

    With ``declared`` given, the user's structure is validated against the
    spectrum (eigenvalue match and implied minimal-polynomial degree) and
    returned.  Otherwise the structure is detected automatically, which is
    only well-posed for diagonalizable maps: eigenvalues are clustered and
    every block size is 1.  A defective map must be declared.
    """
    S = exo.S
    n_w = exo.n_w
    radius = tol * max(1.0, np.linalg.norm(S, 2))
    eigs = np.linalg.eigvals(S)

    if declared is not None:
        if declared.n_w != n_w:
            raise ValueError(
                f"declared structure has dimension {declared.n_w}, exosystem has {n_w}"
            )
        implied = declared.eigenvalues()
        unmatched = list(eigs)
        for lam in implied:
            dists = [abs(lam - mu) for mu in unmatched]
            j = int(np.argmin(dists))
            if dists[j] > max(radius, 100 * tol):
                raise ValueError(
                    "declared Jordan structure inconsistent with exosystem spectrum"
                )
            unmatched.pop(j)
        d_actual = minimal_polynomial(S, tol=tol).degree
        if declared.minimal_degree() != d_actual:
            raise ValueError(
                "declared Jordan structure implies minimal-polynomial degree "
                f"{declared.minimal_degree()}, exosystem has degree {d_actual}"
            )
        return declared

    # Auto mode: every geometric multiplicity must match the algebraic one.
    clusters = _cluster(eigs, radius)
    for center, mult in clusters:
        geo = n_w - _complex_rank(S - center * np.eye(n_w), rel_tol=max(tol, 1e-10))
        if geo < mult:
            raise ValueError("defective exosystem: declare Jordan structure")

    real_blocks = []
    complex_blocks = []
    consumed = np.zeros(len(clusters), dtype=bool)
    for i, (center, mult) in enumerate(clusters):
        if consumed[i]:
            continue
        if abs(center.imag) <= radius:
            real_blocks.extend([(float(center.real), 1)] * mult)
            consumed[i] = True
        else:
            # Pair with the conjugate cluster.
            partner = None
            for j, (other, mult_j) in enumerate(clusters):
                if j != i and not consumed[j] and abs(np.conj(center) - other) <= radius:
                    partner = j
                    break
            if partner is None or clusters[partner][1] != mult:
                raise ValueError("complex eigenvalues do not pair into conjugates")
            consumed[i] = consumed[partner] = True
            rep = center if center.imag > 0 else np.conj(center)
            complex_blocks.extend(
                [(float(abs(rep)), float(np.angle(rep)), 1)] * mult
            )
    real_blocks.sort(key=lambda b: b[0])
    complex_blocks.sort(key=lambda b: (b[1], b[0]))
    return JordanSpec(real_blocks=real_blocks, complex_blocks=complex_blocks)


@dataclass
class Regressor:
    """Known matrix factoring the exosignal stack, with optional row reduction.

    ``selection`` lists the rows kept by :func:`reduce_to_full_row_rank`;
    it is None until :meth:`reduced` has been called.
    """

    matrix: np.ndarray
    method: str
    selection: list[int] | None = None

    @property
    def mhat(self) -> np.ndarray:
        if self.selection is None:
            raise ValueError("regressor has not been reduced to full row rank")
        return self.matrix[self.selection, :]

    def reduced(self, tol: float = DEFAULT_REDUCE_TOL) -> "Regressor":
        _, selection = reduce_to_full_row_rank(self.matrix, tol)
        return Regressor(matrix=self.matrix, method=self.method, selection=selection)


def _real_block_column(lam: float, k: int, t: int) -> np.ndarray:
    """Entries contributed at time t by a real Jordan block of size k."""
    col = np.zeros(k)
    for j in range(1, k + 1):
        e = t - k + j
        b = binomial_ext(t, e)
        if b:
            col[j - 1] = b * lam**e
    return col


def _complex_block_column(rho: float, theta: float, k: int, t: int) -> np.ndarray:
    """Cosine/sine pair entries contributed at time t by a conjugate block pair."""
    col = np.zeros(2 * k)
    for j in range(1, k + 1):
        e = t - k + j
        b = binomial_ext(t, e)
        if b:
            scale = b * rho**e
            col[2 * (j - 1)] = scale * np.cos(theta * e)
            col[2 * (j - 1) + 1] = scale * np.sin(theta * e)
    return col


def build_M_jordan(spec: JordanSpec, ell: int, T: int) -> Regressor:
    """Regressor from the Jordan structure, one column per time ell..T.

    Rows are ordered real blocks first, then cosine/sine pairs of the complex
    blocks; within a block, binomially weighted powers with ascending
    exponent offset (the extended binomial zeroes entries with t below the
    block reach).
    """
    if T < ell:
        raise ValueError("experiment too short")
    cols = []
    for t in range(ell, T + 1):
        parts = [_real_block_column(lam, k, t) for lam, k in spec.real_blocks]
        parts += [
            _complex_block_column(rho, theta, k, t)
            for rho, theta, k in spec.complex_blocks
        ]
        cols.append(np.concatenate(parts) if parts else np.zeros(0))
    return Regressor(matrix=np.column_stack(cols), method="jordan")


def build_M_krylov(exo: ExoMatrix, w_star, ell: int, T: int) -> Regressor:
    """Krylov regressor [w*, S w*, ..., S^(T-ell) w*]; needs a cyclic vector."""
    w_star = as_vector(w_star, "w_star", dim=exo.n_w)
    n_cols = T - ell + 1
    if n_cols < exo.n_w:
        raise ValueError("experiment too short for Krylov factorization")
    cols = [w_star]
    for _ in range(n_cols - 1):
        cols.append(exo.S @ cols[-1])
    M = np.column_stack(cols)
    if rank_with_tol(M) < exo.n_w:
        raise ValueError("w_star not cyclic for S")
    return Regressor(matrix=M, method="krylov")


def regressor_to_csv(reg: Regressor, path) -> None:
    """Dump the regressor rows for inspection: one line per row, plus a
    header naming the construction and any reduction selection."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        kept = "all" if reg.selection is None else ";".join(map(str, reg.selection))
        writer.writerow([f"method={reg.method}", f"kept_rows={kept}"])
        for row in reg.matrix:
            writer.writerow([repr(float(v)) for v in row])


def reduce_to_full_row_rank(
    M, tol: float = DEFAULT_REDUCE_TOL
) -> tuple[np.ndarray, list[int]]:
    """Greedy earliest-row selection of a maximal independent row subset.

    Rows are scanned in order; a row is kept when its residual after
    projection onto the span of the rows already kept exceeds
    ``tol * max row norm``.  Zero rows (and exact duplicates) are dropped.
    Returns the reduced matrix and the kept row indices.
    """
    M = as_matrix(M, "M")
    if M.size == 0:
        raise ValueError("empty input")
    scale = float(np.max(np.linalg.norm(M, axis=1)))
    threshold = tol * max(scale, 1e-300)
    basis: list[np.ndarray] = []
    selection: list[int] = []
    for i, row in enumerate(M):
        r = row.copy()
        for q in basis:
            r -= (q @ r) * q
        # Second orthogonalization pass for numerical safety.
        for q in basis:
            r -= (q @ r) * q
        nr = np.linalg.norm(r)
        if nr > threshold:
            basis.append(r / nr)
            selection.append(i)
    return M[selection, :], selection
