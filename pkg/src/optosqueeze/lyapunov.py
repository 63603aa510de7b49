"""Steady-state covariance of a linear Langevin model and two dynamical oracles.

The covariance ``V_jk = <f_j f_k + f_k f_j>/2`` evolves as
``dV/dt = A V + V A^T + D``; the steady state solves ``A V + V A^T + D = 0``.
"""

from __future__ import annotations

import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import IllConditionedWarning, InsufficientSamplesWarning, StepTooLarge, Unstable
from .linear import LinearModel, is_stable

CONDITION_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class CovarianceResult:
    V: np.ndarray
    residual: float
    method: str  # "algebraic" | "ode" | "stochastic"
    margin: float = math.nan
    stderr: np.ndarray | None = None
    labels: tuple = ()
    info: dict = field(default_factory=dict)

    @property
    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self.V)


def lyapunov_residual(A, V, D) -> float:
    return float(np.abs(A @ V + V @ A.T + D).max())


def symplectic_eigenvalues(V: np.ndarray) -> np.ndarray:
    """Symplectic spectrum of a quadrature covariance ordered as (X1, Y1, X2, Y2, ...).

    Physical states have every value >= 1/2 in the vacuum-1/2 normalization.
    """
    n = V.shape[0] // 2
    omega = np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    nu = np.sort(np.abs(np.linalg.eigvals(1j * omega @ V)))
    return nu[::2]


def _triu_index(n):
    return [(i, j) for i in range(n) for j in range(i, n)]


def _require_stable(m: LinearModel) -> float:
    st = is_stable(m)
    if not st.stable:
        raise Unstable(st.margin)
    return st.margin


def solve_steady(m: LinearModel) -> CovarianceResult:
    """Solve ``A V + V A^T = -D`` over the independent entries of symmetric V.

    The n(n+1)/2 unknowns are the upper triangle of V; the system is solved
    by dense LU with partial pivoting plus one step of iterative refinement.

    Raises
    ------
    Unstable
        If the drift has an eigenvalue with non-negative real part.
    """
    margin = _require_stable(m)
    A, D = m.A, m.D
    n = m.dim
    idx = _triu_index(n)
    K = np.empty((len(idx), len(idx)))
    for col, (k, l) in enumerate(idx):
        E = np.zeros((n, n))
        E[k, l] = E[l, k] = 1.0
        L = A @ E + E @ A.T
        K[:, col] = [L[i, j] for i, j in idx]
    rhs = -np.array([D[i, j] for i, j in idx])

    cond = np.linalg.cond(K)
    if cond > CONDITION_LIMIT:
        warnings.warn(f"steady covariance system has condition number {cond:.2e}", IllConditionedWarning, stacklevel=2)

    lu = scipy.linalg.lu_factor(K, check_finite=False)
    x = scipy.linalg.lu_solve(lu, rhs)
    x = x + scipy.linalg.lu_solve(lu, rhs - K @ x)

    V = np.zeros((n, n))
    for value, (i, j) in zip(x, idx):
        V[i, j] = V[j, i] = value
    return CovarianceResult(
        V=V,
        residual=lyapunov_residual(A, V, D),
        method="algebraic",
        margin=margin,
        labels=m.labels,
        info={"condition": float(cond)},
    )


def _rk4_step(A, D, V, h):
    def f(X):
        return A @ X + X @ A.T + D

    k1 = f(V)
    k2 = f(V + 0.5 * h * k1)
    k3 = f(V + 0.5 * h * k2)
    k4 = f(V + h * k3)
    out = V + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return 0.5 * (out + out.T)


def integrate_covariance(
    m: LinearModel,
    V0: np.ndarray,
    T: float,
    dt: float | None = None,
    loop_limit: int = 4096,
) -> CovarianceResult:
    """Integrate ``dV/dt = A V + V A^T + D`` with fixed-step classical RK4.

    ``T`` is rounded up to a whole number of steps of size at most ``dt``.
    Up to ``loop_limit`` steps are taken one by one; longer horizons apply the
    same one-step map by repeated squaring (the RK4 step is affine in V for a
    constant drift), which reproduces step-by-step iteration without the cost.

    Raises
    ------
    StepTooLarge
        If ``dt * ||A||_2 > 0.1``.
    """
    A, D = m.A, m.D
    norm = np.linalg.norm(A, 2)
    if dt is None:
        dt = 0.05 / max(norm, 1e-300)
    if dt * norm > 0.1:
        raise StepTooLarge(f"dt * ||A|| = {dt * norm:.3g} exceeds 0.1")
    V0 = np.asarray(V0, dtype=float)
    if not np.allclose(V0, V0.T):
        raise ValueError("V0 must be symmetric")

    steps = max(1, math.ceil(T / dt - 1e-9))
    h = T / steps
    n = m.dim
    if steps <= loop_limit:
        V = V0.copy()
        for _ in range(steps):
            V = _rk4_step(A, D, V, h)
    else:
        # One-step map v -> M v + c on vec(V), columns from the matrix-level step.
        zero = np.zeros((n, n))
        c = _rk4_step(A, D, zero, h).ravel()
        M = np.empty((n * n, n * n))
        for k in range(n * n):
            E = np.zeros(n * n)
            E[k] = 1.0
            E = E.reshape(n, n)
            M[:, k] = _rk4_homogeneous(A, E, h).ravel()
        acc_M, acc_c = np.eye(n * n), np.zeros(n * n)
        base_M, base_c = M, c
        left = steps
        while left:
            if left & 1:
                acc_M, acc_c = base_M @ acc_M, base_M @ acc_c + base_c
            base_M, base_c = base_M @ base_M, base_M @ base_c + base_c
            left >>= 1
        V = (acc_M @ V0.ravel() + acc_c).reshape(n, n)
        V = 0.5 * (V + V.T)

    st = is_stable(m)
    return CovarianceResult(
        V=V,
        residual=lyapunov_residual(A, V, D),
        method="ode",
        margin=st.margin,
        labels=m.labels,
        info={"steps": steps, "dt": h, "T": T},
    )


def _rk4_homogeneous(A, E, h):
    # RK4 step of dV/dt = A V + V A^T, unsymmetrized (basis matrices are not symmetric).
    def f(X):
        return A @ X + X @ A.T

    k1 = f(E)
    k2 = f(E + 0.5 * h * k1)
    k3 = f(E + 0.5 * h * k2)
    k4 = f(E + h * k3)
    return E + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def default_stochastic_dt(m: LinearModel, margin: float) -> float:
    """Step that keeps the Euler-Maruyama covariance bias well under 1 %."""
    lam = max(np.abs(np.linalg.eigvals(m.A)).max(), 1.0)
    return min(0.01 / lam, 0.05 * margin / lam**2)


def _noise_factor(D):
    w, U = np.linalg.eigh(D)
    return U * np.sqrt(np.clip(w, 0.0, None))


def _simulate_chunk(A, B, n_traj, steps, dt, seed, chunk, richardson, stride=1, block=64):
    """Euler-Maruyama trajectories from zero; time-averaged f f^T over the second half.

    Each loop iteration is one coarse step (two fine steps). ``f f^T`` is
    accumulated every ``stride`` coarse steps once past the burn-in.
    """
    rng = np.random.Generator(np.random.SFC64(np.random.SeedSequence([seed, chunk])))
    n = A.shape[0]
    coarse = steps // 2
    burn = coarse // 2
    f = np.zeros((n_traj, n))
    g = np.zeros((n_traj, n))
    Ft = (np.eye(n) + dt * A).T
    Gt = (np.eye(n) + 2 * dt * A).T
    sB = math.sqrt(dt) * B.T
    acc_f = np.zeros((n_traj, n, n))
    acc_g = np.zeros((n_traj, n, n))
    count = 0
    noise = None
    for k in range(coarse):
        j = k % block
        if j == 0:
            noise = rng.standard_normal((min(block, coarse - k), 2, n_traj, n)) @ sB
        w1, w2 = noise[j, 0], noise[j, 1]
        f = f @ Ft + w1
        f = f @ Ft + w2
        if richardson:
            g = g @ Gt + (w1 + w2)
        if k >= burn and (k - burn) % stride == 0:
            acc_f += f[:, :, None] * f[:, None, :]
            if richardson:
                acc_g += g[:, :, None] * g[:, None, :]
            count += 1
    est_f = acc_f / count
    if not richardson:
        return est_f
    return 2.0 * est_f - acc_g / count


def exact_transition(A: np.ndarray, D: np.ndarray, h: float):
    """Transition matrix and noise covariance of ``df = A f dt + B dW`` over ``h``.

    ``Q(h) = int_0^h e^{As} D e^{A^T s} ds`` comes from the Van Loan block
    exponential at a step small enough to avoid overflow, then is doubled up
    with ``Q(2h) = Q(h) + Phi(h) Q(h) Phi(h)^T``.
    """
    n = A.shape[0]
    norm = np.linalg.norm(A, 2)
    k = max(0, math.ceil(math.log2(max(h * norm, 1e-300))))
    h0 = h / 2**k
    M = np.block([[-A, D], [np.zeros((n, n)), A.T]]) * h0
    C = scipy.linalg.expm(M)
    Phi = C[n:, n:].T
    Q = Phi @ C[:n, n:]
    for _ in range(k):
        Q = Q + Phi @ Q @ Phi.T
        Phi = Phi @ Phi
    return Phi, 0.5 * (Q + Q.T)


def _simulate_exact_chunk(Phi, L, n_traj, steps, seed, chunk, block=64):
    """Exactly discretized trajectories from zero; f f^T averaged over the second half."""
    rng = np.random.Generator(np.random.SFC64(np.random.SeedSequence([seed, chunk])))
    n = Phi.shape[0]
    burn = steps // 2
    f = np.zeros((n_traj, n))
    Pt, Lt = Phi.T, L.T
    acc = np.zeros((n_traj, n, n))
    count = 0
    noise = None
    for k in range(steps):
        j = k % block
        if j == 0:
            noise = rng.standard_normal((min(block, steps - k), n_traj, n)) @ Lt
        f = f @ Pt + noise[j]
        if k >= burn:
            acc += f[:, :, None] * f[:, None, :]
            count += 1
    return acc / count


def sample_stochastic(
    m: LinearModel,
    n_traj: int = 2000,
    T: float | None = None,
    dt: float | None = None,
    seed: int = 0,
    richardson: bool = True,
    chunk_size: int = 250,
    workers: int = 1,
    scheme: str = "euler",
) -> CovarianceResult:
    """Monte-Carlo estimate of the stationary covariance.

    Integrates ``df = A f dt + B dW`` with ``B B^T = D``, so the stationary
    covariance satisfies the same Lyapunov equation as :func:`solve_steady`.
    Each trajectory starts at zero and is time-averaged over the second half
    of ``[0, T]`` (default ``T = 20 / margin``).

    ``scheme="euler"`` is Euler-Maruyama.  With ``richardson`` every
    trajectory is also advanced with step ``2 dt`` on the same Brownian
    increments and the two estimates are combined as ``2 V_dt - V_2dt``,
    cancelling the first-order step bias.  ``scheme="exact"`` steps with the
    exact transition of the linear SDE (:func:`exact_transition`), default
    ``dt = 0.05 / margin``; it has no step bias and handles stiff models whose
    slowest mode would need billions of Euler steps.

    Trajectories are simulated in fixed chunks seeded by ``(seed, chunk)``,
    so results do not depend on ``workers``.  ``stderr`` holds the standard
    error of every entry, computed from the spread across trajectories.
    """
    if scheme not in ("euler", "exact"):
        raise ValueError(f"scheme must be 'euler' or 'exact' (got {scheme!r})")
    margin = _require_stable(m)
    A = m.A
    if T is None:
        T = 20.0 / margin
    sizes = [min(chunk_size, n_traj - s) for s in range(0, n_traj, chunk_size)]
    info = {"n_traj": n_traj, "T": T, "seed": seed, "scheme": scheme}

    if scheme == "euler":
        if dt is None:
            dt = default_stochastic_dt(m, margin)
        steps = 2 * max(2, math.ceil(T / dt / 2))
        B = _noise_factor(m.D)
        # Samples closer than ~0.02 relaxation times are nearly redundant.
        stride = max(1, int(0.02 / margin / (2 * dt)))
        info.update(dt=dt, steps=steps, stride=stride, richardson=richardson)

        def job(c):
            return _simulate_chunk(A, B, sizes[c], steps, dt, seed, c, richardson, stride)

    else:
        if dt is None:
            dt = 0.05 / margin
        steps = max(4, math.ceil(T / dt))
        Phi, Q = exact_transition(A, m.D, T / steps)
        L = _noise_factor(Q)
        info.update(dt=T / steps, steps=steps)

        def job(c):
            return _simulate_exact_chunk(Phi, L, sizes[c], steps, seed, c)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(c) for c in range(len(sizes))]
    per_traj = np.concatenate(parts, axis=0)
    V = per_traj.mean(axis=0)
    V = 0.5 * (V + V.T)
    stderr = per_traj.std(axis=0, ddof=1) / math.sqrt(n_traj)

    diag = np.diag(V)
    rel = np.diag(stderr) / np.where(diag > 0, diag, np.inf)
    if np.any(rel > 0.1):
        warnings.warn(f"relative standard error up to {rel.max():.1%}", InsufficientSamplesWarning, stacklevel=2)
    return CovarianceResult(
        V=V,
        residual=lyapunov_residual(A, V, m.D),
        method="stochastic",
        margin=margin,
        stderr=stderr,
        labels=m.labels,
        info=info,
    )


def covariance_csv(res: CovarianceResult) -> str:
    """Upper triangle of V as CSV, one labelled entry per row."""
    n = res.V.shape[0]
    labels = res.labels or tuple(f"f{i}" for i in range(n))
    buf = io.StringIO()
    header = ["i", "j", "label_i", "label_j", "value"]
    if res.stderr is not None:
        header.append("stderr")
    buf.write(",".join(header) + "\r\n")
    for i, j in _triu_index(n):
        row = [str(i), str(j), labels[i], labels[j], format(res.V[i, j], ".17g")]
        if res.stderr is not None:
            row.append(format(res.stderr[i, j], ".17g"))
        buf.write(",".join(row) + "\r\n")
    return buf.getvalue()


def covariance_record(res: CovarianceResult) -> str:
    """Compact JSON record of a covariance result and its diagnostics."""
    record = {
        "method": res.method,
        "residual": res.residual,
        "margin": res.margin,
        "labels": list(res.labels),
        "V": res.V.tolist(),
        "symplectic_eigenvalues": res.symplectic_eigenvalues.tolist(),
        "info": res.info,
    }
    if res.stderr is not None:
        record["stderr"] = res.stderr.tolist()
    return json.dumps(record, sort_keys=True, separators=(",", ":"))
