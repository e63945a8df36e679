"""Data-collection experiment on the plant plus internal model, and assembly
of the designer-visible data stacks.

The record keeps the measured input/output/internal-model sequences visible
and segregates the exosignal (and state) behind an oracle attribute that the
design path never touches.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .internal_model import InternalModel, simulate_internal_model
from .plant import ExoMatrix, PlantTruth, simulate_plant


@dataclass
class NormalInputPolicy:
    """Seeded standard-normal probing input, one draw per channel and step."""

    seed: int
    scale: float = 1.0

    def sample(self, steps: int, m: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return self.scale * rng.standard_normal((steps, m))

    def manifest(self) -> dict:
        return {
            "type": "normal",
            "generator": "numpy-pcg64",
            "seed": int(self.seed),
            "scale": float(self.scale),
        }


@dataclass
class OracleTraces:
    """Hidden experiment signals; only oracle/verifier paths may read these."""

    w: np.ndarray  # (T+1, n_w)
    x: np.ndarray  # (T+1, n)


@dataclass
class ExperimentRecord:
    """Sequences from one data-collection run.

    ``u``/``y`` cover steps 0..T, ``eta`` covers 0..T+1 (the internal model is
    advanced once more by the final measured output).
    """

    T: int
    ell: int
    u: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    oracle: OracleTraces = field(repr=False)
    input_manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.T < self.ell:
            raise ValueError("experiment too short")
        if self.u.shape[0] != self.T + 1 or self.y.shape[0] != self.T + 1:
            raise ValueError("u and y must cover steps 0..T")
        if self.eta.shape[0] != self.T + 2:
            raise ValueError("eta must cover steps 0..T+1")

    @property
    def m(self) -> int:
        return self.u.shape[1]

    @property
    def p(self) -> int:
        return self.y.shape[1]

    @property
    def im_dim(self) -> int:
        return self.eta.shape[1]

    def internal_model_residual(self, im: InternalModel) -> float:
        """Worst defect of the stored eta sequence against its recursion."""
        worst = 0.0
        for k in range(self.T + 1):
            e = self.eta[k + 1] - (im.companion @ self.eta[k] + im.input_map @ self.y[k])
            worst = max(worst, float(np.linalg.norm(e)))
        return worst


def collect_experiment(
    plant: PlantTruth,
    exo: ExoMatrix,
    im: InternalModel,
    w0,
    x0,
    eta0,
    input_policy,
    T: int,
    ell: int,
) -> ExperimentRecord:
    """Run one experiment of length T with window length ell.

    ``input_policy`` is either an explicit (T+1) x m array of input samples or
    a :class:`NormalInputPolicy`.
    """
    if T < ell:
        raise ValueError("experiment too short")
    if isinstance(input_policy, NormalInputPolicy):
        u = input_policy.sample(T + 1, plant.m)
        manifest = input_policy.manifest()
    else:
        u = np.asarray(input_policy, dtype=float)
        if u.ndim == 1:
            u = u.reshape(-1, 1)
        if u.shape[0] < T + 1:
            raise ValueError(f"explicit input needs {T + 1} samples, got {u.shape[0]}")
        u = u[: T + 1]
        manifest = {"type": "explicit"}

    traj = simulate_plant(plant, exo, w0, x0, u[:T], T)
    eta = simulate_internal_model(im, eta0, traj.y)
    return ExperimentRecord(
        T=T,
        ell=ell,
        u=u,
        y=traj.y,
        eta=eta,
        oracle=OracleTraces(w=traj.w, x=traj.x),
        input_manifest=manifest,
    )


@dataclass
class DataMatrices:
    """Designer-visible stacks plus the hidden exosignal stack.

    Column j of ``psi0`` holds the output window y(j..j+ell-1), the input
    window u(j..j+ell-1) and the internal-model state eta(j+ell); ``psi1``
    holds the same quantities shifted one step.  ``u1`` holds u(ell..T).
    ``w0_oracle`` stacks w(ell..T) and exists only for verification.
    """

    ell: int
    u1: np.ndarray
    psi0: np.ndarray
    psi1: np.ndarray
    w0_oracle: np.ndarray = field(repr=False)

    @property
    def n_cols(self) -> int:
        return self.u1.shape[1]

    @property
    def n_rows(self) -> int:
        return self.psi0.shape[0]


def assemble_data_matrices(rec: ExperimentRecord) -> DataMatrices:
    """Stack the record into the design-facing data matrices."""
    T, ell = rec.T, rec.ell
    N = T - ell + 1
    u1 = rec.u[ell : T + 1].T.copy()

    def window_col(j, shift):
        return np.concatenate(
            [
                rec.y[j + shift : j + shift + ell].ravel(),
                rec.u[j + shift : j + shift + ell].ravel(),
                rec.eta[j + shift + ell],
            ]
        )

    psi0 = np.column_stack([window_col(j, 0) for j in range(N)])
    psi1 = np.column_stack([window_col(j, 1) for j in range(N)])
    w0 = rec.oracle.w[ell : T + 1].T.copy()
    return DataMatrices(ell=ell, u1=u1, psi0=psi0, psi1=psi1, w0_oracle=w0)


def record_to_csv(rec: ExperimentRecord, path, unmask: bool = False) -> None:
    """Write the record as CSV: k, u_*, y_*, eta_*; exosignal only if unmasked."""
    header = (
        ["k"]
        + [f"u_{i + 1}" for i in range(rec.m)]
        + [f"y_{i + 1}" for i in range(rec.p)]
        + [f"eta_{i + 1}" for i in range(rec.im_dim)]
    )
    if unmask:
        header += [f"w_{i + 1}" for i in range(rec.oracle.w.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(rec.T + 1):
            row = [k, *rec.u[k], *rec.y[k], *rec.eta[k]]
            if unmask:
                row += list(rec.oracle.w[k])
            writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def record_from_csv(path, ell: int, im: InternalModel, m: int, p: int) -> ExperimentRecord:
    """Rebuild a designer-visible record from CSV.

    The stored eta rows cover 0..T; the final state eta(T+1) is recomputed
    from the recursion, and the whole eta sequence is validated against it.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    expected = 1 + m + p + im.dim
    if len(header) < expected:
        raise ValueError(f"CSV needs at least {expected} columns, got {len(header)}")
    data = np.array([[float(v) for v in row[1:expected]] for row in body])
    T = len(body) - 1
    u = data[:, :m]
    y = data[:, m : m + p]
    eta_stored = data[:, m + p : m + p + im.dim]
    eta = np.vstack(
        [eta_stored, im.companion @ eta_stored[-1] + im.input_map @ y[-1]]
    )
    rec = ExperimentRecord(
        T=T,
        ell=ell,
        u=u,
        y=y,
        eta=eta,
        oracle=OracleTraces(w=np.zeros((T + 1, 0)), x=np.zeros((T + 1, 0))),
        input_manifest={"type": "csv"},
    )
    if rec.internal_model_residual(im) > 1e-10:
        raise ValueError("eta sequence in CSV is inconsistent with the internal model")
    return rec
