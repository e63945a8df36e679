"""Internal model of the exosystem: a block-companion copy of the minimal
polynomial of S, driven by the measured output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import PolynomialCoeffs, as_matrix, as_vector, minimal_polynomial
from .plant import UNIT_CIRCLE_SLACK, ExoMatrix


@dataclass
class InternalModel:
    """State update eta(k+1) = companion @ eta(k) + input_map @ y(k).

    ``companion`` is the block-companion matrix of the minimal polynomial of
    the exosystem map: identity blocks on the superdiagonal and
    ``-coeffs[i] * I_p`` across the last block row.  ``input_map`` injects
    the measured output into the last block row.
    """

    degree: int
    coeffs: np.ndarray
    p: int
    companion: np.ndarray = field(repr=False)
    input_map: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.p * self.degree

    def polynomial(self) -> PolynomialCoeffs:
        return PolynomialCoeffs(degree=self.degree, coeffs=self.coeffs.copy())


def build_internal_model(
    exo: ExoMatrix,
    p: int,
    tol: float = 1e-8,
    snap_coeffs_tol: float | None = None,
) -> InternalModel:
    """Assemble the internal model for a ``p``-output plant from S.

    Coefficients are kept at full floating precision.  ``snap_coeffs_tol``
    optionally rounds each coefficient to the nearest integer when it is
    already within that tolerance of one (off by default).
    """
    if p < 1:
        raise ValueError(f"output count must be >= 1, got {p}")
    S = exo.S
    moduli = np.abs(np.linalg.eigvals(S))
    if np.any(moduli < 1.0 - UNIT_CIRCLE_SLACK):
        raise ValueError("exosystem eigenvalue inside unit circle")
    poly = minimal_polynomial(S, tol=tol)
    coeffs = poly.coeffs
    if snap_coeffs_tol is not None:
        snapped = np.round(coeffs)
        coeffs = np.where(np.abs(coeffs - snapped) <= snap_coeffs_tol, snapped, coeffs)

    d = poly.degree
    dim = p * d
    companion = np.zeros((dim, dim))
    for i in range(d - 1):
        companion[i * p : (i + 1) * p, (i + 1) * p : (i + 2) * p] = np.eye(p)
    for j in range(d):
        companion[(d - 1) * p : d * p, j * p : (j + 1) * p] = -coeffs[j] * np.eye(p)
    input_map = np.zeros((dim, p))
    input_map[(d - 1) * p : d * p, :] = np.eye(p)
    return InternalModel(
        degree=d, coeffs=coeffs, p=p, companion=companion, input_map=input_map
    )


def simulate_internal_model(im: InternalModel, eta0, y_seq) -> np.ndarray:
    """Drive the internal model with an output sequence.

    Returns the state sequence eta(0..K) where K = len(y_seq); one more
    point than outputs, since each output advances the state once.
    """
    eta0 = as_vector(eta0, "eta0", dim=im.dim)
    y = as_matrix(y_seq, "y_seq")
    if y.shape[1] != im.p:
        raise ValueError(f"y samples must have {im.p} entries, got {y.shape[1]}")
    K = y.shape[0]
    eta = np.empty((K + 1, im.dim))
    eta[0] = eta0
    for k in range(K):
        eta[k + 1] = im.companion @ eta[k] + im.input_map @ y[k]
    return eta
