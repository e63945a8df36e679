"""Ground-truth plant/exosystem representation, simulation and the stacked
window matrices (observability stack, input/exosignal Toeplitz maps,
reachability rows) the oracle builds on.

The plant

    w(k+1) = S w(k)
    x(k+1) = A x(k) + B u(k) + P w(k)
    y(k)   = C x(k) + Q w(k)

is known only to the harness; the design pipeline sees input-output data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    DEFAULT_RANK_RTOL,
    as_matrix,
    as_vector,
    rank_with_tol,
)

# Eigenvalues of the exosystem map may not dip below the unit circle by more
# than this slack.
UNIT_CIRCLE_SLACK = 1e-9

# Simulations abort once any state norm passes this bound, signalling
# divergence instead of emitting Inf.
DIVERGENCE_GUARD = 1e12


def observability_index(A, C, rel_tol: float = DEFAULT_RANK_RTOL) -> int:
    """Minimal window length l with ``rank [C; CA; ...; CA^(l-1)] = n``.

    Raises
    ------
    ValueError
        If the stacked rank never reaches n ("unobservable pair").
    """
    A = as_matrix(A, "A", square=True)
    C = as_matrix(C, "C")
    n = A.shape[0]
    if C.shape[1] != n:
        raise ValueError(f"C must have {n} columns, got {C.shape[1]}")
    rows = [C]
    for depth in range(1, n + 1):
        stacked = np.vstack(rows)
        if rank_with_tol(stacked, rel_tol) == n:
            return depth
        rows.append(rows[-1] @ A)
    raise ValueError("unobservable pair")


@dataclass
class ExoMatrix:
    """Known exosystem map S.  All eigenvalue moduli must be >= 1."""

    S: np.ndarray

    def __post_init__(self):
        self.S = as_matrix(self.S, "S", square=True)
        moduli = np.abs(np.linalg.eigvals(self.S))
        if np.any(moduli < 1.0 - UNIT_CIRCLE_SLACK):
            raise ValueError("exosystem eigenvalue inside unit circle")
        # Invertibility is implied by the modulus bound; double-check via rank.
        if rank_with_tol(self.S) < self.S.shape[0]:
            raise ValueError("exosystem matrix is singular")

    @property
    def n_w(self) -> int:
        return self.S.shape[0]


@dataclass
class PlantTruth:
    """Hidden ground-truth matrices of the plant; oracle/verifier use only."""

    A: np.ndarray
    B: np.ndarray
    P: np.ndarray
    C: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        self.A = as_matrix(self.A, "A", square=True)
        n = self.A.shape[0]
        self.B = as_matrix(self.B, "B")
        self.P = as_matrix(self.P, "P")
        self.C = as_matrix(self.C, "C")
        self.Q = as_matrix(self.Q, "Q")
        if self.B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {self.B.shape[0]}")
        if self.P.shape[0] != n:
            raise ValueError(f"P must have {n} rows, got {self.P.shape[0]}")
        if self.C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {self.C.shape[1]}")
        if self.Q.shape[0] != self.C.shape[0]:
            raise ValueError(
                f"Q must have {self.C.shape[0]} rows, got {self.Q.shape[0]}"
            )
        if self.Q.shape[1] != self.P.shape[1]:
            raise ValueError(
                f"Q must have {self.P.shape[1]} columns, got {self.Q.shape[1]}"
            )
        # Observability of (A, C) underpins the whole construction.
        observability_index(self.A, self.C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def n_w(self) -> int:
        return self.P.shape[1]


@dataclass
class Trajectory:
    """One simulated run: states carry K+1 points, inputs K points."""

    steps: int
    w: np.ndarray  # (K+1, n_w)
    x: np.ndarray  # (K+1, n)
    y: np.ndarray  # (K+1, p)
    u: np.ndarray  # (K, m)

    def __post_init__(self):
        K = self.steps
        for name in ("w", "x", "y"):
            arr = getattr(self, name)
            if arr.shape[0] != K + 1:
                raise ValueError(f"{name} must have {K + 1} rows, got {arr.shape[0]}")
        if self.u.shape[0] != K:
            raise ValueError(f"u must have {K} rows, got {self.u.shape[0]}")

    def recursion_residual(self, plant: PlantTruth, exo: ExoMatrix) -> float:
        """Worst one-step defect of the stored run against the plant equations."""
        worst = 0.0
        for k in range(self.steps):
            ew = self.w[k + 1] - exo.S @ self.w[k]
            ex = self.x[k + 1] - (
                plant.A @ self.x[k] + plant.B @ self.u[k] + plant.P @ self.w[k]
            )
            ey = self.y[k] - (plant.C @ self.x[k] + plant.Q @ self.w[k])
            worst = max(
                worst,
                np.linalg.norm(ew),
                np.linalg.norm(ex),
                np.linalg.norm(ey),
            )
        ey_last = self.y[-1] - (plant.C @ self.x[-1] + plant.Q @ self.w[-1])
        return max(worst, float(np.linalg.norm(ey_last)))


def simulate_plant(
    plant: PlantTruth,
    exo: ExoMatrix,
    w0,
    x0,
    u_seq,
    steps: int,
) -> Trajectory:
    """Roll the plant forward ``steps`` steps under the given input sequence.

    Deterministic: identical inputs give bit-identical outputs.  Aborts with
    an error if any state norm exceeds the divergence guard.
    """
    w0 = as_vector(w0, "w0", dim=exo.n_w)
    x0 = as_vector(x0, "x0", dim=plant.n)
    u_seq = np.asarray(u_seq, dtype=float)
    if u_seq.ndim == 1:
        u_seq = u_seq.reshape(-1, 1)
    if u_seq.shape[0] < steps:
        raise ValueError(f"need at least {steps} input samples, got {u_seq.shape[0]}")
    if u_seq.shape[1] != plant.m:
        raise ValueError(f"u samples must have {plant.m} entries, got {u_seq.shape[1]}")
    if plant.n_w != exo.n_w:
        raise ValueError("plant and exosystem disagree on the exosignal dimension")

    w = np.empty((steps + 1, exo.n_w))
    x = np.empty((steps + 1, plant.n))
    y = np.empty((steps + 1, plant.p))
    w[0], x[0] = w0, x0
    for k in range(steps):
        y[k] = plant.C @ x[k] + plant.Q @ w[k]
        x[k + 1] = plant.A @ x[k] + plant.B @ u_seq[k] + plant.P @ w[k]
        w[k + 1] = exo.S @ w[k]
        if np.linalg.norm(x[k + 1]) > DIVERGENCE_GUARD:
            raise RuntimeError(
                f"state norm exceeded {DIVERGENCE_GUARD:.0e} at step {k + 1}: "
                "divergent simulation"
            )
    y[steps] = plant.C @ x[steps] + plant.Q @ w[steps]
    return Trajectory(steps=steps, w=w, x=x, y=y, u=np.array(u_seq[:steps]))


@dataclass
class StructuralMatrices:
    """Stacked-window maps of the plant at window length ``ell``.

    ``obs`` stacks C, CA, ..., CA^(ell-1); ``toeplitz_u``/``toeplitz_w`` map
    the stacked input/exosignal window to the stacked output window (block
    lower-triangular Toeplitz, the exosignal one carrying Q on the diagonal);
    ``reach_u``/``reach_w`` map the windows to the state advanced ell steps.
    ``obs_pinv`` is the Moore-Penrose left inverse of ``obs``.
    """

    ell: int
    obs: np.ndarray
    toeplitz_u: np.ndarray
    toeplitz_w: np.ndarray
    reach_u: np.ndarray
    reach_w: np.ndarray
    obs_pinv: np.ndarray = field(repr=False)


def build_structural_matrices(plant: PlantTruth, ell: int) -> StructuralMatrices:
    """Window maps for a window of ``ell`` steps; requires observability at ell."""
    if ell < 1:
        raise ValueError(f"window length must be >= 1, got {ell}")
    n, m, p, n_w = plant.n, plant.m, plant.p, plant.n_w
    A, B, P, C, Q = plant.A, plant.B, plant.P, plant.C, plant.Q

    powers = [np.eye(n)]
    for _ in range(ell):
        powers.append(powers[-1] @ A)

    obs = np.vstack([C @ powers[j] for j in range(ell)])
    if rank_with_tol(obs) < n:
        raise ValueError("ell below observability index")

    toeplitz_u = np.zeros((p * ell, m * ell))
    toeplitz_w = np.zeros((p * ell, n_w * ell))
    for i in range(ell):
        toeplitz_w[i * p : (i + 1) * p, i * n_w : (i + 1) * n_w] = Q
        for j in range(i):
            blk = C @ powers[i - j - 1]
            toeplitz_u[i * p : (i + 1) * p, j * m : (j + 1) * m] = blk @ B
            toeplitz_w[i * p : (i + 1) * p, j * n_w : (j + 1) * n_w] = blk @ P

    reach_u = np.hstack([powers[ell - 1 - j] @ B for j in range(ell)])
    reach_w = np.hstack([powers[ell - 1 - j] @ P for j in range(ell)])
    obs_pinv = np.linalg.pinv(obs)
    return StructuralMatrices(
        ell=ell,
        obs=obs,
        toeplitz_u=toeplitz_u,
        toeplitz_w=toeplitz_w,
        reach_u=reach_u,
        reach_w=reach_w,
        obs_pinv=obs_pinv,
    )
