"""Design program: assemble and solve the feasibility SDP on designer-visible
data only, and extract the feedback gain.

The decision variables are a symmetric matrix X and a rectangular Y tied by
``[X; 0] = [psi0; mhat] Y`` with ``X > 0`` and the stability block
``[[X, psi1 Y], [(psi1 Y)^T, X]] > 0``.  The equality is eliminated exactly:
Y is parameterized on the nullspace of ``mhat``, X is defined as ``psi0 Y``
with symmetry imposed linearly, and the scale is pinned by ``trace X = nu``
(the constraints are jointly homogeneous in (X, Y), so the normalization is
lossless).  What remains is a margin maximization over two affine symmetric
blocks, handed to a pluggable backend; the built-in dense interior-point
solver is the default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exo_factorization import Regressor
from .experiment import DataMatrices
from .numerics import DEFAULT_RANK_RTOL, as_matrix, rank_with_tol
from .sdp import AffineBlock, maximize_margin

DEFAULT_FEAS_TOL = 1e-6


@dataclass
class SolverOptions:
    feas_tol: float = DEFAULT_FEAS_TOL
    gap_tol: float = 1e-9
    max_newton: int = 400
    backend: str = "interior_point"


@dataclass
class SdpProblem:
    """Designer-visible problem data.  Never holds the exosignal stack."""

    u1: np.ndarray
    psi0: np.ndarray
    psi1: np.ndarray
    mhat: np.ndarray

    def __post_init__(self):
        self.u1 = as_matrix(self.u1, "u1")
        self.psi0 = as_matrix(self.psi0, "psi0")
        self.psi1 = as_matrix(self.psi1, "psi1")
        self.mhat = as_matrix(self.mhat, "mhat")
        if self.psi1.shape != self.psi0.shape:
            raise ValueError("psi0 and psi1 must have identical shapes")
        N = self.psi0.shape[1]
        if self.u1.shape[1] != N or (self.mhat.size and self.mhat.shape[1] != N):
            raise ValueError("data matrices disagree on the number of columns")

    @property
    def nu(self) -> int:
        return self.psi0.shape[0]

    @property
    def n_cols(self) -> int:
        return self.psi0.shape[1]

    @property
    def nhat_w(self) -> int:
        return self.mhat.shape[0]


@dataclass
class SynthesisResult:
    status: str  # feasible | infeasible | numerical_failure
    margin: float
    X: np.ndarray | None
    Y: np.ndarray | None
    K: np.ndarray | None
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "margin": self.margin,
            "gain": None if self.K is None else self.K.tolist(),
            "diagnostics": list(self.diagnostics),
        }


def assemble_sdp(data: DataMatrices, reg: Regressor) -> SdpProblem:
    """Bundle the data stacks with the reduced regressor."""
    mhat = reg.mhat  # raises if the regressor was never reduced
    if mhat.shape[1] != data.psi0.shape[1]:
        raise ValueError(
            f"regressor has {mhat.shape[1]} columns, data has {data.psi0.shape[1]}"
        )
    if rank_with_tol(mhat) < mhat.shape[0]:
        raise ValueError("reduced regressor is not full row rank")
    return SdpProblem(u1=data.u1, psi0=data.psi0, psi1=data.psi1, mhat=mhat)


def _nullspace(M: np.ndarray, rtol: float = DEFAULT_RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the right nullspace (columns), at the package-wide
    rank tolerance."""
    if M.shape[0] == 0:
        return np.eye(M.shape[1])
    _, s, vh = np.linalg.svd(M)
    if s.size and s[0] > 0:
        rank = int(np.count_nonzero(s > rtol * s[0]))
    else:
        rank = 0
    return vh[rank:].T.copy()


def _elimination(prob: SdpProblem):
    """Linear-equality elimination.

    Returns (null_m, z0, basis) where ``Y = null_m @ Z``, the vectorized Z
    splits as ``z0 + basis @ zeta``, and z0/basis satisfy the symmetry of
    ``psi0 Y`` and ``trace(psi0 Y) = nu``.  Returns None when the equality
    system is inconsistent (no normalized point exists at all).
    """
    nu = prob.nu
    null_m = _nullspace(prob.mhat)
    q = null_m.shape[1]
    if q == 0:
        return None
    H0 = prob.psi0 @ null_m  # (nu, q)

    # Unknown z = vec(Z), Z in R^(q x nu), index (a, b) -> a * nu + b.
    n_sym = nu * (nu - 1) // 2
    E = np.zeros((n_sym + 1, q * nu))
    rhs = np.zeros(n_sym + 1)
    row = 0
    for i in range(nu):
        for j in range(i + 1, nu):
            for a in range(q):
                E[row, a * nu + j] += H0[i, a]
                E[row, a * nu + i] -= H0[j, a]
            row += 1
    for i in range(nu):
        for a in range(q):
            E[n_sym, a * nu + i] += H0[i, a]
    rhs[n_sym] = float(nu)

    z0, *_ = np.linalg.lstsq(E, rhs, rcond=None)
    if np.linalg.norm(E @ z0 - rhs) > 1e-8 * max(1.0, np.linalg.norm(rhs)):
        return None
    basis = _nullspace(E)
    return null_m, z0, basis


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def solve_feasibility_sdp(
    prob: SdpProblem, opts: SolverOptions | None = None
) -> SynthesisResult:
    """Margin-maximization solve of the design program.

    Feasible means the achieved margin exceeds ``opts.feas_tol``; the margin
    is the smallest eigenvalue across both matrix blocks at the returned
    point.  The returned X and Y satisfy the equality constraint by
    construction up to round-off.
    """
    opts = opts or SolverOptions()
    nu, N = prob.nu, prob.n_cols
    diagnostics = [
        f"dims: nu={nu} N={N} nhat_w={prob.nhat_w}",
    ]

    elim = _elimination(prob)
    if elim is None:
        diagnostics.append(
            "equality constraints admit no normalized solution "
            "(trace(psi0 Y) = nu unreachable); problem infeasible"
        )
        return SynthesisResult(
            status="infeasible",
            margin=-np.inf,
            X=None,
            Y=None,
            K=None,
            diagnostics=diagnostics,
        )
    null_m, z0, basis = elim
    q = null_m.shape[1]
    diagnostics.append(f"eliminated problem: {basis.shape[1]} free parameters (q={q})")

    H0 = prob.psi0 @ null_m
    H1 = prob.psi1 @ null_m

    def surfaces(zvec):
        Z = zvec.reshape(q, nu)
        X = _sym(H0 @ Z)
        W = H1 @ Z
        return X, W

    # Quotient out directions that move Y without moving either matrix block
    # (they exist whenever [psi0; psi1] has a kernel on the regressor
    # nullspace).  They leave the margin untouched but make the barrier
    # Hessian singular; dropping them also pins the minimum-norm optimizer.
    images = np.empty((basis.shape[1], 2 * nu * nu))
    for k in range(basis.shape[1]):
        Xk, Wk = surfaces(basis[:, k])
        images[k] = np.concatenate([Xk.ravel(), Wk.ravel()])
    u_img, s_img, _ = np.linalg.svd(images, full_matrices=False)
    if s_img.size and s_img[0] > 0:
        eff_rank = int(np.count_nonzero(s_img > 1e-12 * s_img[0]))
    else:
        eff_rank = 0
    basis = basis @ u_img[:, :eff_rank]
    n_free = basis.shape[1]
    diagnostics.append(f"effective free parameters after flat removal: {n_free}")

    X0, W0 = surfaces(z0)
    coeff_x = np.empty((n_free, nu, nu))
    coeff_s = np.empty((n_free, 2 * nu, 2 * nu))
    const_s = np.block([[X0, W0], [W0.T, X0]])
    for k in range(n_free):
        Xk, Wk = surfaces(basis[:, k])
        coeff_x[k] = Xk
        coeff_s[k] = np.block([[Xk, Wk], [Wk.T, Xk]])

    blocks = [
        AffineBlock(const=X0, coeff=coeff_x),
        AffineBlock(const=const_s, coeff=coeff_s),
    ]

    if opts.backend == "interior_point":
        try:
            res = maximize_margin(
                blocks, gap_tol=opts.gap_tol, max_newton=opts.max_newton
            )
        except RuntimeError as exc:
            return SynthesisResult(
                status="numerical_failure",
                margin=float("nan"),
                X=None,
                Y=None,
                K=None,
                diagnostics=diagnostics + [f"interior point failed: {exc}"],
            )
        diagnostics.extend(res.log)
        if not res.converged:
            return SynthesisResult(
                status="numerical_failure",
                margin=res.margin,
                X=None,
                Y=None,
                K=None,
                diagnostics=diagnostics,
            )
        zeta = res.v
        margin = res.margin
    elif opts.backend == "cvxpy":
        zeta, margin, message = _solve_with_cvxpy(blocks)
        diagnostics.append(message)
        if zeta is None:
            return SynthesisResult(
                status="numerical_failure",
                margin=float("nan"),
                X=None,
                Y=None,
                K=None,
                diagnostics=diagnostics,
            )
    else:
        raise ValueError(f"unknown solver backend: {opts.backend}")

    z_opt = z0 + basis @ zeta if n_free else z0
    Z = z_opt.reshape(q, nu)
    Y = null_m @ Z
    X = _sym(prob.psi0 @ Y)

    diagnostics.append(f"margin={margin:.6e} feas_tol={opts.feas_tol:.1e}")
    if margin <= opts.feas_tol:
        return SynthesisResult(
            status="infeasible",
            margin=margin,
            X=X,
            Y=Y,
            K=None,
            diagnostics=diagnostics,
        )

    resid_m = np.linalg.norm(prob.mhat @ Y) if prob.nhat_w else 0.0
    resid_eq = np.linalg.norm(prob.psi0 @ Y - X)
    diagnostics.append(
        f"residuals: |mhat Y|={resid_m:.2e} |psi0 Y - X|={resid_eq:.2e}"
    )
    K = extract_gain(prob, X, Y)
    return SynthesisResult(
        status="feasible", margin=margin, X=X, Y=Y, K=K, diagnostics=diagnostics
    )


def _solve_with_cvxpy(blocks):
    """Optional external conic backend over the same eliminated variables."""
    try:
        import cvxpy as cp
    except ImportError:
        return None, float("nan"), "cvxpy backend unavailable"
    n_free = blocks[0].nvar
    zeta = cp.Variable(n_free)
    t = cp.Variable()
    cons = []
    for b in blocks:
        expr = cp.Constant(b.const)
        for k in range(n_free):
            expr = expr + zeta[k] * b.coeff[k]
        cons.append(expr - t * np.eye(b.size) >> 0)
    problem = cp.Problem(cp.Maximize(t), cons)
    try:
        problem.solve()
    except cp.error.SolverError as exc:
        return None, float("nan"), f"cvxpy failed: {exc}"
    if zeta.value is None or t.value is None:
        return None, float("nan"), f"cvxpy status: {problem.status}"
    v = np.asarray(zeta.value).reshape(-1)
    margin = min(float(np.linalg.eigvalsh(b.value(v))[0]) for b in blocks)
    return v, margin, f"cvxpy status: {problem.status}"


def extract_gain(prob: SdpProblem, X, Y, identity_tol: float = 1e-6) -> np.ndarray:
    """Gain ``K = u1 Y X^{-1}``, with the stacked interpolation identity
    ``[K; I; 0] = [u1; psi0; mhat] (Y X^{-1})`` verified before returning.
    """
    X = as_matrix(X, "X", square=True)
    Y = as_matrix(Y, "Y")
    eigs = np.linalg.eigvalsh(_sym(X))
    if eigs[0] <= 1e-10:
        raise ValueError(
            f"X is numerically singular (min eigenvalue {eigs[0]:.2e})"
        )
    G = np.linalg.solve(_sym(X), Y.T).T  # Y X^{-1}
    K = prob.u1 @ G
    nu = prob.nu
    stacked_lhs = np.vstack([K, np.eye(nu), np.zeros((prob.nhat_w, nu))])
    stacked_rhs = np.vstack([prob.u1, prob.psi0, prob.mhat]) @ G
    defect = np.linalg.norm(stacked_lhs - stacked_rhs)
    if defect > identity_tol:
        raise RuntimeError(
            f"gain interpolation identity violated: defect {defect:.2e}"
        )
    return K


@dataclass
class PrecheckReport:
    messages: list[str]
    provably_infeasible: bool


def feasibility_precheck(
    p: int,
    ell: int,
    mhat: np.ndarray,
    psi0: np.ndarray,
    n_truth: int | None = None,
) -> PrecheckReport:
    """Cheap feasibility diagnostics run before the solver.

    With ground-truth access, ``p * ell > n`` and a full-row-rank regressor
    certify infeasibility.  Designer-side, a rank-deficient ``[psi0; mhat]``
    stack usually prevents the equality constraint from producing X > 0
    (heuristic, not a proof), and short experiments are flagged.
    """
    mhat = as_matrix(mhat, "mhat")
    psi0 = as_matrix(psi0, "psi0")
    nu, N = psi0.shape
    messages = []
    provably = False
    if n_truth is not None and p * ell > n_truth:
        provably = True
        messages.append(
            f"provably infeasible: full-row-rank regressor with p*ell = "
            f"{p * ell} > n = {n_truth}"
        )
    stack = np.vstack([psi0, mhat]) if mhat.size else psi0
    need = nu + mhat.shape[0]
    have = rank_with_tol(stack) if stack.size else 0
    if have < need:
        messages.append(
            f"heuristic: rank [psi0; mhat] = {have} < {need}; the equality "
            "constraint generically cannot produce a positive definite X"
        )
    if N < need:
        messages.append(
            f"experiment-length guidance: {N} data columns < {need} "
            "(rows of psi0 plus reduced regressor); collect a longer run"
        )
    return PrecheckReport(messages=messages, provably_infeasible=provably)
