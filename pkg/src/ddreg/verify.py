"""Oracle-side verification: the auxiliary stacked-window system, the
closed loop of plant plus dynamic controller, and every identity the design
rests on, each evaluated as a residual.

Everything here may read ground truth; nothing here feeds the design path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .experiment import DataMatrices, ExperimentRecord
from .internal_model import InternalModel
from .numerics import as_matrix, as_vector, solve_sylvester, spectral_radius
from .plant import (
    DIVERGENCE_GUARD,
    ExoMatrix,
    PlantTruth,
    StructuralMatrices,
)


@dataclass
class AuxiliaryMatrices:
    """Stacked-window auxiliary system and its cascade with the internal model.

    ``window_shift`` advances the (output, input) window one step;
    ``inject_y``/``inject_u`` write the newest output/input into the window;
    ``exo_window_map`` maps the current exosignal state to the stacked values
    over the trailing window (inverse powers of S, then identity);
    ``y_from_window``/``y_from_exo`` reproduce the plant output from the
    window and the stacked exosignal.  ``ext_*`` are the one-step matrices of
    the window state cascaded with the internal model.
    """

    ell: int
    window_shift: np.ndarray
    inject_y: np.ndarray
    inject_u: np.ndarray
    exo_window_map: np.ndarray
    y_from_window: np.ndarray
    y_from_exo: np.ndarray
    window_a: np.ndarray
    ext_a: np.ndarray
    ext_b: np.ndarray
    ext_p: np.ndarray
    struct: StructuralMatrices = field(repr=False)

    @property
    def window_dim(self) -> int:
        return self.window_shift.shape[0]


def build_auxiliary_matrices(
    plant: PlantTruth,
    struct: StructuralMatrices,
    exo: ExoMatrix,
    im: InternalModel,
) -> AuxiliaryMatrices:
    """Assemble the auxiliary system at the window length of ``struct``."""
    ell = struct.ell
    n, m, p, n_w = plant.n, plant.m, plant.p, plant.n_w
    A, C, Q = plant.A, plant.C, plant.Q

    wd = (m + p) * ell
    window_shift = np.zeros((wd, wd))
    for i in range(ell - 1):
        window_shift[i * p : (i + 1) * p, (i + 1) * p : (i + 2) * p] = np.eye(p)
    off = p * ell
    for i in range(ell - 1):
        window_shift[
            off + i * m : off + (i + 1) * m, off + (i + 1) * m : off + (i + 2) * m
        ] = np.eye(m)

    inject_y = np.zeros((wd, p))
    inject_y[(ell - 1) * p : ell * p, :] = np.eye(p)
    inject_u = np.zeros((wd, m))
    inject_u[off + (ell - 1) * m : off + ell * m, :] = np.eye(m)

    s_inv = np.linalg.inv(exo.S)
    stack = [np.eye(n_w)]
    for _ in range(ell):
        stack.append(stack[-1] @ s_inv)
    exo_window_map = np.vstack(stack[::-1])  # S^-ell, ..., S^-1, I

    a_pow = np.linalg.matrix_power(A, ell)
    core = C @ a_pow @ struct.obs_pinv
    y_from_window = np.hstack(
        [core, C @ struct.reach_u - core @ struct.toeplitz_u]
    )
    y_from_exo = np.hstack([C @ struct.reach_w - core @ struct.toeplitz_w, Q])

    window_a = window_shift + inject_y @ y_from_window

    dim_im = im.dim
    ext_a = np.block(
        [
            [window_a, np.zeros((wd, dim_im))],
            [im.input_map @ y_from_window, im.companion],
        ]
    )
    ext_b = np.vstack([inject_u, np.zeros((dim_im, m))])
    ext_p = np.vstack([inject_y @ y_from_exo, im.input_map @ y_from_exo])

    return AuxiliaryMatrices(
        ell=ell,
        window_shift=window_shift,
        inject_y=inject_y,
        inject_u=inject_u,
        exo_window_map=exo_window_map,
        y_from_window=y_from_window,
        y_from_exo=y_from_exo,
        window_a=window_a,
        ext_a=ext_a,
        ext_b=ext_b,
        ext_p=ext_p,
        struct=struct,
    )


def check_data_identity(data: DataMatrices, aux: AuxiliaryMatrices) -> float:
    """Relative defect of the one-step data relation, using the hidden
    exosignal stack: psi1 against ext_a psi0 + ext_b u1 + ext_p (stacked w).
    """
    predicted = (
        aux.ext_a @ data.psi0
        + aux.ext_b @ data.u1
        + aux.ext_p @ aux.exo_window_map @ data.w0_oracle
    )
    return float(
        np.linalg.norm(data.psi1 - predicted) / max(1.0, np.linalg.norm(data.psi1))
    )


def oracle_factorization_residual(data: DataMatrices, regressor_matrix) -> float:
    """Best least-squares factorization of the hidden exosignal stack against
    the rows of the known regressor, as a relative residual.
    """
    M = as_matrix(regressor_matrix, "regressor")
    W0 = data.w0_oracle
    L, *_ = np.linalg.lstsq(M.T, W0.T, rcond=None)
    return float(np.linalg.norm(W0 - L.T @ M) / max(np.linalg.norm(W0), 1e-300))


def check_claim1(
    rec: ExperimentRecord,
    plant: PlantTruth,
    struct: StructuralMatrices,
) -> tuple[float, float, float]:
    """Window-reconstruction identities along a recorded run.

    Returns the worst relative residual of (output window, state, output)
    reconstructed from the trailing windows, over all steps k >= ell.
    """
    ell = struct.ell
    y, u, w, x = rec.y, rec.u, rec.oracle.w, rec.oracle.x
    a_pow = np.linalg.matrix_power(plant.A, ell)
    state_from_window = a_pow @ struct.obs_pinv
    ru_eff = struct.reach_u - state_from_window @ struct.toeplitz_u
    rw_eff = struct.reach_w - state_from_window @ struct.toeplitz_w

    scale = max(
        1.0,
        float(np.abs(y).max()),
        float(np.abs(x).max()),
        float(np.abs(w).max()),
        float(np.abs(u).max()),
    )
    worst = [0.0, 0.0, 0.0]
    for k in range(ell, rec.T + 1):
        yw = y[k - ell : k].ravel()
        uw = u[k - ell : k].ravel()
        ww = w[k - ell : k].ravel()
        r1 = yw - (
            struct.obs @ x[k - ell] + struct.toeplitz_u @ uw + struct.toeplitz_w @ ww
        )
        r2 = x[k] - (state_from_window @ yw + ru_eff @ uw + rw_eff @ ww)
        r3 = y[k] - (
            plant.C @ state_from_window @ yw
            + plant.C @ ru_eff @ uw
            + plant.C @ rw_eff @ ww
            + plant.Q @ w[k]
        )
        for i, r in enumerate((r1, r2, r3)):
            worst[i] = max(worst[i], float(np.linalg.norm(r)))
    return tuple(v / scale for v in worst)


def check_solution_correspondence(
    plant: PlantTruth,
    aux: AuxiliaryMatrices,
    exo: ExoMatrix,
    u_seq,
    w0,
    x0,
    chi0=None,
    steps: int = 30,
) -> tuple[float, float]:
    """Lockstep comparison of the actual closed-window system and the
    auxiliary system started from the prescribed initial stack.

    The auxiliary run starts at step ell with the window state built from the
    initial plant state, the first ell inputs and the exosignal history, and
    its exosignal state advanced ell steps.  Returns the worst relative
    mismatch of (window state, output) over steps ell..steps.
    """
    ell = aux.ell
    struct = aux.struct
    n_w, m, p = exo.n_w, plant.m, plant.p
    if steps <= ell:
        raise ValueError(f"need more than ell={ell} steps, got {steps}")
    u_seq = np.asarray(u_seq, dtype=float)
    if u_seq.ndim == 1:
        u_seq = u_seq.reshape(-1, 1)
    if u_seq.shape[0] < steps:
        raise ValueError(f"need {steps} input samples, got {u_seq.shape[0]}")
    w0 = as_vector(w0, "w0", dim=n_w)
    x0 = as_vector(x0, "x0", dim=plant.n)
    chi0 = (
        np.zeros(aux.window_dim)
        if chi0 is None
        else as_vector(chi0, "chi0", dim=aux.window_dim)
    )

    # Actual system plus window recursion.
    w = np.empty((steps + 1, n_w))
    x = np.empty((steps + 1, plant.n))
    y = np.empty((steps + 1, p))
    chi = np.empty((steps + 1, aux.window_dim))
    w[0], x[0], chi[0] = w0, x0, chi0
    for k in range(steps):
        y[k] = plant.C @ x[k] + plant.Q @ w[k]
        x[k + 1] = plant.A @ x[k] + plant.B @ u_seq[k] + plant.P @ w[k]
        w[k + 1] = exo.S @ w[k]
        chi[k + 1] = (
            aux.window_shift @ chi[k] + aux.inject_y @ y[k] + aux.inject_u @ u_seq[k]
        )
        if np.linalg.norm(x[k + 1]) > DIVERGENCE_GUARD:
            raise RuntimeError("divergent simulation")
    y[steps] = plant.C @ x[steps] + plant.Q @ w[steps]

    # Auxiliary system from the prescribed initialization.
    exo_hist = np.vstack([np.linalg.matrix_power(exo.S, j) for j in range(ell)])
    xi = np.concatenate(
        [
            struct.obs @ x0
            + struct.toeplitz_u @ u_seq[:ell].ravel()
            + struct.toeplitz_w @ (exo_hist @ w0),
            u_seq[:ell].ravel(),
        ]
    )
    omega = np.linalg.matrix_power(exo.S, ell) @ w0

    scale = max(1.0, float(np.abs(y).max()), float(np.abs(u_seq[:steps]).max()))
    worst_state = 0.0
    worst_out = 0.0
    for k in range(ell, steps + 1):
        window = np.concatenate([y[k - ell : k].ravel(), u_seq[k - ell : k].ravel()])
        phi = aux.y_from_window @ xi + aux.y_from_exo @ aux.exo_window_map @ omega
        worst_state = max(
            worst_state,
            float(np.linalg.norm(xi - window)),
            float(np.linalg.norm(xi - chi[k])),
        )
        worst_out = max(worst_out, float(np.linalg.norm(phi - y[k])))
        if k < steps:
            xi = (
                aux.window_a @ xi
                + aux.inject_u @ u_seq[k]
                + aux.inject_y @ aux.y_from_exo @ aux.exo_window_map @ omega
            )
            omega = exo.S @ omega
    return worst_state / scale, worst_out / scale


@dataclass
class ClosedLoopModel:
    """Plant under the dynamic output-feedback controller.

    State blocks, in order: exosignal w, plant state x, window state chi,
    internal-model state eta.  ``full_map`` is the one-step matrix on the
    whole stack; ``core_map`` drops the exosignal row/column (the autonomous
    part whose spectral radius decides internal stability).
    """

    plant: PlantTruth
    exo: ExoMatrix
    aux: AuxiliaryMatrices
    im: InternalModel
    gain: np.ndarray
    full_map: np.ndarray = field(repr=False)
    core_map: np.ndarray = field(repr=False)

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (self.exo.n_w, self.plant.n, self.aux.window_dim, self.im.dim)


def assemble_closed_loop(
    plant: PlantTruth,
    exo: ExoMatrix,
    aux: AuxiliaryMatrices,
    im: InternalModel,
    gain,
) -> ClosedLoopModel:
    """One-step block map of the closed loop under u = gain @ (chi, eta)."""
    gain = as_matrix(gain, "gain")
    wd, di = aux.window_dim, im.dim
    n, m, p, n_w = plant.n, plant.m, plant.p, plant.n_w
    if gain.shape != (m, wd + di):
        raise ValueError(f"gain must be {m}x{wd + di}, got {gain.shape}")
    k_chi = gain[:, :wd]
    k_eta = gain[:, wd:]

    A, B, P, C, Q = plant.A, plant.B, plant.P, plant.C, plant.Q
    core = np.block(
        [
            [A, B @ k_chi, B @ k_eta],
            [
                aux.inject_y @ C,
                aux.window_shift + aux.inject_u @ k_chi,
                aux.inject_u @ k_eta,
            ],
            [im.input_map @ C, np.zeros((di, wd)), im.companion],
        ]
    )
    w_col = np.vstack([P, aux.inject_y @ Q, im.input_map @ Q])
    full = np.block(
        [
            [exo.S, np.zeros((n_w, n + wd + di))],
            [w_col, core],
        ]
    )
    return ClosedLoopModel(
        plant=plant, exo=exo, aux=aux, im=im, gain=gain, full_map=full, core_map=core
    )


def check_internal_stability(cl: ClosedLoopModel) -> float:
    """Spectral radius of the exosignal-free closed loop; stable iff < 1."""
    return spectral_radius(cl.core_map)


@dataclass
class ClosedLoopRun:
    steps: int
    w: np.ndarray
    x: np.ndarray
    chi: np.ndarray
    eta: np.ndarray
    y: np.ndarray
    u: np.ndarray
    tail_max_y: float
    settle_step: int | None

    def core_norm(self, k: int) -> float:
        return float(
            np.linalg.norm(np.concatenate([self.x[k], self.chi[k], self.eta[k]]))
        )


def simulate_closed_loop(
    cl: ClosedLoopModel,
    w0,
    x0,
    chi0,
    eta0,
    steps: int,
    eps_reg: float = 1e-4,
    tail_frac: float = 0.1,
) -> ClosedLoopRun:
    """Roll the closed loop and measure regulation.

    ``tail_max_y`` is the largest output norm over the final ``tail_frac``
    of the horizon; ``settle_step`` is the first step from which the output
    norm stays below ``eps_reg`` to the end (None if it never does).
    """
    n_w, n, wd, di = cl.dims
    w0 = as_vector(w0, "w0", dim=n_w)
    x0 = as_vector(x0, "x0", dim=n)
    chi0 = as_vector(chi0, "chi0", dim=wd)
    eta0 = as_vector(eta0, "eta0", dim=di)

    plant, exo, aux, im = cl.plant, cl.exo, cl.aux, cl.im
    w = np.empty((steps + 1, n_w))
    x = np.empty((steps + 1, n))
    chi = np.empty((steps + 1, wd))
    eta = np.empty((steps + 1, di))
    y = np.empty((steps + 1, plant.p))
    u = np.empty((steps, plant.m))
    w[0], x[0], chi[0], eta[0] = w0, x0, chi0, eta0
    for k in range(steps):
        y[k] = plant.C @ x[k] + plant.Q @ w[k]
        u[k] = cl.gain @ np.concatenate([chi[k], eta[k]])
        x[k + 1] = plant.A @ x[k] + plant.B @ u[k] + plant.P @ w[k]
        chi[k + 1] = aux.window_shift @ chi[k] + aux.inject_y @ y[k] + aux.inject_u @ u[k]
        eta[k + 1] = im.companion @ eta[k] + im.input_map @ y[k]
        w[k + 1] = exo.S @ w[k]
        if np.linalg.norm(x[k + 1]) > DIVERGENCE_GUARD:
            raise RuntimeError("divergent closed-loop simulation")
    y[steps] = plant.C @ x[steps] + plant.Q @ w[steps]

    y_norms = np.linalg.norm(y, axis=1)
    tail_start = max(0, int(np.floor((1.0 - tail_frac) * steps)))
    tail_max = float(np.max(y_norms[tail_start:]))
    settle = None
    below = y_norms < eps_reg
    for k in range(steps + 1):
        if np.all(below[k:]):
            settle = k
            break
    return ClosedLoopRun(
        steps=steps,
        w=w,
        x=x,
        chi=chi,
        eta=eta,
        y=y,
        u=u,
        tail_max_y=tail_max,
        settle_step=settle,
    )


def check_regulator_equations(
    aux: AuxiliaryMatrices,
    exo: ExoMatrix,
    closed_data_matrix,
) -> tuple[float, float]:
    """Steady-state (Sylvester) certificate for zero asymptotic output.

    Solves ``A_cl P - P S = -ext_p exo_window_map`` for the closed-loop
    matrix ``A_cl`` (in its data representation) and returns the norm of
    ``y_from_exo exo_window_map + y_from_window P_top`` together with the
    relative Sylvester residual.
    """
    A_cl = as_matrix(closed_data_matrix, "closed-loop matrix", square=True)
    rho = spectral_radius(A_cl)
    if rho >= 1.0:
        raise ValueError(f"closed-loop matrix is not Schur (radius {rho:.4f})")
    rhs = -(aux.ext_p @ aux.exo_window_map)
    Pi = solve_sylvester(A_cl, exo.S, rhs)
    syl = np.linalg.norm(A_cl @ Pi - Pi @ exo.S - rhs)
    denom = (
        (np.linalg.norm(A_cl) + np.linalg.norm(exo.S)) * np.linalg.norm(Pi) + 1e-300
    )
    pi_top = Pi[: aux.window_dim]
    identity = float(
        np.linalg.norm(
            aux.y_from_exo @ aux.exo_window_map + aux.y_from_window @ pi_top
        )
    )
    return identity, float(syl / denom)


def check_representation_equivalence(
    aux: AuxiliaryMatrices, gain, closed_data_matrix
) -> float:
    """Gap between the spectral radii of the model-side closed loop
    (ext_a + ext_b gain) and its data-side representation.
    """
    gain = as_matrix(gain, "gain")
    model_side = aux.ext_a + aux.ext_b @ gain
    return abs(spectral_radius(model_side) - spectral_radius(closed_data_matrix))
