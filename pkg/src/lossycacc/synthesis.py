"""Discrete-time H-infinity state-feedback design.

The plant is ``x+ = A x + B xi + E nu``, ``z = Cz x + Dxi xi`` and the
controller ``xi = Fbar x + Lbar nu``. Attenuation level ``gamma`` enters the
Riccati recursion through the ``-gamma**2 I`` block of ``G(P)``, which is the
same as scaling ``E`` by ``1/gamma``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from lossycacc.errors import PreconditionError, SynthesisError
from lossycacc.metrics import closed_loop_norm

log = logging.getLogger(__name__)

MAX_FIXED_POINT_ITER = 10_000
FIXED_POINT_RTOL = 1e-10
UNIT_CIRCLE_TOL = 1e-6
DEFINITE_RTOL = 1e-9
RESIDUAL_RTOL = 1e-8


@dataclass
class RiccatiSolution:
    """Outcome of one attempt at the H-infinity Riccati equation.

    When ``feasible`` is False, ``diagnostic`` names the failed condition and
    the matrices hold the last iterate (possibly ``None``).
    """

    P: np.ndarray | None
    V: np.ndarray | None
    Rcond: np.ndarray | None
    gamma: float
    iterations: int
    residual: float
    feasible: bool = True
    method: str = "fixed-point"
    diagnostic: str = ""


@dataclass
class NominalGains:
    Fbar: np.ndarray
    Lbar: float
    gamma: float
    info: dict = field(default_factory=dict)


def _plant(model):
    A = np.asarray(model.A, dtype=float)
    B = np.asarray(model.B, dtype=float)
    E = np.asarray(model.E, dtype=float)
    C = np.asarray(model.Cz, dtype=float)
    D = np.asarray(model.Dxi, dtype=float)
    return A, B, E, C, D


def _is_pos_def(M: np.ndarray) -> bool:
    M = np.atleast_2d(M)
    eig = np.linalg.eigvalsh((M + M.T) / 2)
    scale = max(np.linalg.norm(M, 2), np.finfo(float).tiny)
    return bool(eig.min() > DEFINITE_RTOL * scale)


def invariant_zeros(A, B, C, D, tol: float = 1e-8) -> np.ndarray:
    """Invariant zeros of ``(A, B, C, D)``.

    Candidates come from a square compression of the Rosenbrock pencil
    (with a fixed seeded projection); each is kept only if the full pencil
    loses rank there.
    """
    A, B, C, D = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, C, D))
    n, m = B.shape
    p = C.shape[0]
    M = np.block([[A, B], [C, D]])
    N = np.zeros_like(M)
    N[:n, :n] = np.eye(n)
    rng = np.random.default_rng(0x5EED)
    if p > m:
        W = np.linalg.qr(rng.standard_normal((n + p, n + m)))[0].T
        Ms, Ns = W @ M, W @ N
    elif p < m:
        W = np.linalg.qr(rng.standard_normal((n + m, n + p)))[0]
        Ms, Ns = M @ W, N @ W
    else:
        Ms, Ns = M, N
    cand = scipy.linalg.eigvals(Ms, Ns)
    cand = cand[np.isfinite(cand)]
    scale = np.linalg.norm(M, 2) + 1.0
    zeros = []
    for z in cand:
        s = np.linalg.svd(M - z * N, compute_uv=False)
        if s[-1] <= tol * scale:
            zeros.append(z)
    return np.array(zeros, dtype=complex)


def check_no_unit_circle_zeros(model) -> None:
    A, B, _, C, D = _plant(model)
    zeros = invariant_zeros(A, B, C, D)
    bad = zeros[np.abs(np.abs(zeros) - 1.0) <= UNIT_CIRCLE_TOL]
    if bad.size:
        raise PreconditionError(f"(A, B, Cz, Dxi) has invariant zeros on the unit circle: {bad}")


def riccati_map(P, A, B, E, C, D, gamma):
    """One application of the Riccati right-hand side.

    Returns ``(P_next, V, Rcond)``; ``P_next`` is None when ``G(P)`` is
    singular.
    """
    BtP = B.T @ P
    EtP = E.T @ P
    V = D.T @ D + BtP @ B
    Rcond = gamma**2 * np.eye(E.shape[1]) - EtP @ E + EtP @ B @ np.linalg.solve(V, BtP @ E)
    S = np.vstack([BtP @ A + D.T @ C, EtP @ A])
    G = np.block([[V, BtP @ E], [EtP @ B, EtP @ E - gamma**2 * np.eye(E.shape[1])]])
    try:
        P_next = A.T @ P @ A + C.T @ C - S.T @ np.linalg.solve(G, S)
    except np.linalg.LinAlgError:
        return None, V, Rcond
    return (P_next + P_next.T) / 2, V, Rcond


def _dare_fallback(A, B, E, C, D, gamma):
    BB = np.hstack([B, E])
    m, q = B.shape[1], E.shape[1]
    Rm = np.zeros((m + q, m + q))
    Rm[:m, :m] = D.T @ D
    Rm[m:, m:] = -(gamma**2) * np.eye(q)
    S = np.hstack([C.T @ D, np.zeros((A.shape[0], q))])
    P = scipy.linalg.solve_discrete_are(A, BB, C.T @ C, Rm, s=S)
    return (P + P.T) / 2


def _validate(P, A, B, E, C, D, gamma) -> tuple[str, np.ndarray | None, np.ndarray | None, float]:
    P_next, V, Rcond = riccati_map(P, A, B, E, C, D, gamma)
    norm_P = np.linalg.norm(P)
    residual = np.inf if P_next is None else float(np.linalg.norm(P_next - P))
    if np.linalg.eigvalsh(P).min() < -DEFINITE_RTOL * max(1.0, norm_P):
        return "P >= 0 violated", V, Rcond, residual
    if not _is_pos_def(V):
        return "condition 1 (V > 0) violated", V, Rcond, residual
    if not _is_pos_def(Rcond):
        return "condition 2 (R > 0) violated", V, Rcond, residual
    if residual > RESIDUAL_RTOL * (1.0 + norm_P):
        return f"condition 3 (Riccati residual {residual:.3e}) violated", V, Rcond, residual
    F = -np.linalg.solve(V, B.T @ P @ A + D.T @ C)
    rho = np.abs(np.linalg.eigvals(A + B @ F)).max()
    if rho >= 1.0 - 1e-9:
        return f"closed loop not Schur (spectral radius {rho:.12f})", V, Rcond, residual
    return "", V, Rcond, residual


def solve_hinf_riccati(model, gamma: float, max_iter: int = MAX_FIXED_POINT_ITER) -> RiccatiSolution:
    """Look for ``P >= 0`` certifying a closed-loop ``nu -> z`` norm below ``gamma``.

    Fixed-point iteration from ``P = 0`` is tried first; if it does not
    settle within ``max_iter`` steps the stabilizing solution is taken from
    the generalized-eigenvalue DARE solver. Infeasibility is reported through
    the returned object, never raised.

    Raises
    ------
    PreconditionError
        If ``gamma <= 0`` or the plant has invariant zeros on the unit circle.
    """
    if not gamma > 0:
        raise PreconditionError(f"gamma must be positive, got {gamma}")
    check_no_unit_circle_zeros(model)
    A, B, E, C, D = _plant(model)
    n = A.shape[0]

    P = np.zeros((n, n))
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        P_next, V, Rcond = riccati_map(P, A, B, E, C, D, gamma)
        if not _is_pos_def(V):
            return RiccatiSolution(P, V, Rcond, gamma, iterations, np.inf, False, diagnostic="condition 1 (V > 0) violated during iteration")
        if P_next is None or not _is_pos_def(Rcond):
            return RiccatiSolution(P, V, Rcond, gamma, iterations, np.inf, False, diagnostic="condition 2 (R > 0) violated during iteration")
        step = np.linalg.norm(P_next - P)
        P = P_next
        if step <= FIXED_POINT_RTOL * max(np.linalg.norm(P), 1e-300):
            converged = True
            break

    method = "fixed-point"
    if not converged:
        log.debug("fixed-point iteration stalled at gamma=%g, falling back to DARE", gamma)
        method = "dare"
        try:
            P = _dare_fallback(A, B, E, C, D, gamma)
        except (np.linalg.LinAlgError, ValueError) as exc:
            return RiccatiSolution(P, None, None, gamma, iterations, np.inf, False, method, f"DARE failed: {exc}")

    problem, V, Rcond, residual = _validate(P, A, B, E, C, D, gamma)
    return RiccatiSolution(P, V, Rcond, gamma, iterations, residual, not problem, method, problem)


def synthesize_gains(sol: RiccatiSolution, model) -> NominalGains:
    """State-feedback and feedforward gains from a feasible Riccati solution."""
    if not sol.feasible:
        raise SynthesisError(f"cannot build gains from infeasible solution: {sol.diagnostic}")
    A, B, E, C, D = _plant(model)
    P = sol.P
    V = D.T @ D + B.T @ P @ B
    try:
        Fbar = -np.linalg.solve(V, B.T @ P @ A + D.T @ C)
        Lbar = -np.linalg.solve(V, B.T @ P @ E)
    except np.linalg.LinAlgError as exc:
        raise SynthesisError(f"V is singular: {exc}") from exc
    info = {"iterations": sol.iterations, "residual": sol.residual, "method": sol.method}
    return NominalGains(Fbar=Fbar, Lbar=float(Lbar[0, 0]), gamma=sol.gamma, info=info)


def closed_loop_matrices(model, gains: NominalGains):
    """``(Acl, Bcl, Ccl, Dcl)`` of the nominal ``nu -> z`` loop."""
    A, B, E, C, D = _plant(model)
    F = np.atleast_2d(gains.Fbar)
    L = np.atleast_2d(gains.Lbar)
    return A + B @ F, E + B @ L, C + D @ F, D @ L


def min_gamma(model, tol: float = 1e-3, gamma_hi: float = 100.0, gamma_floor: float = 1e-6):
    """Smallest certified attenuation level, by bisection.

    Bisection runs on ``log(gamma)`` until ``gamma_hi / gamma_lo - 1 <= tol``.
    If ``gamma_floor`` itself is feasible it is returned directly.

    Returns
    -------
    tuple
        ``(gamma_star, NominalGains)`` for the smallest feasible level tried.
    """
    sol_hi = solve_hinf_riccati(model, gamma_hi)
    if not sol_hi.feasible:
        raise SynthesisError(f"infeasible at gamma_hi={gamma_hi}: {sol_hi.diagnostic}")
    sol_lo = solve_hinf_riccati(model, gamma_floor)
    if sol_lo.feasible:
        return gamma_floor, _with_bisection_info(synthesize_gains(sol_lo, model), 0)

    lo, hi, best = gamma_floor, gamma_hi, sol_hi
    steps = 0
    while hi / lo - 1.0 > tol:
        mid = float(np.sqrt(lo * hi))
        sol = solve_hinf_riccati(model, mid)
        steps += 1
        log.debug("gamma=%.6g feasible=%s (%s)", mid, sol.feasible, sol.diagnostic or sol.method)
        if sol.feasible:
            hi, best = mid, sol
        else:
            lo = mid
    return hi, _with_bisection_info(synthesize_gains(best, model), steps)


def _with_bisection_info(gains: NominalGains, steps: int) -> NominalGains:
    gains.info["bisection_steps"] = steps
    return gains


def certified_norm(model, gains: NominalGains, grid_points: int = 2048) -> float:
    return closed_loop_norm(*closed_loop_matrices(model, gains), grid_points=grid_points)
