"""Independent reference computations used by the tests.

Nothing here imports the package's numerical routines, so agreement with
the package is evidence rather than tautology.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.optimize


def continuous_triple(tau, h):
    Ac = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0 / tau]])
    Bc = np.array([[0.0], [-h / tau], [(h - tau) / tau**2]])
    Ec = np.array([[0.0], [0.0], [1.0 / tau]])
    return Ac, Bc, Ec


def zoh_expm(tau, h, Ts):
    """Hold discretization via the exponential of the augmented block matrix."""
    Ac, Bc, Ec = continuous_triple(tau, h)
    M = np.zeros((5, 5))
    M[:3, :3] = Ac
    M[:3, 3:4] = Bc
    M[:3, 4:5] = Ec
    X = scipy.linalg.expm(M * Ts)
    return X[:3, :3], X[:3, 3:4], X[:3, 4:5]


def simulate_delayed(A, B, E, d, xi, nu, x0=None):
    """``x(k+1) = A x(k) + B xi(k-d) + E nu(k-d)`` with zero inputs before 0."""
    n = A.shape[0]
    x = np.zeros(n) if x0 is None else np.asarray(x0, float)
    out = [x]
    for k in range(len(xi) - 1):
        u = xi[k - d] if k >= d else 0.0
        w = nu[k - d] if k >= d else 0.0
        x = A @ x + B.ravel() * u + E.ravel() * w
        out.append(x)
    return np.array(out)


def freq_response(A, B, C, D, z):
    n = A.shape[0]
    return C @ np.linalg.solve(z * np.eye(n) - A, B) + D


def dense_hinf(A, B, C, D, points=20_001):
    """Peak gain over a dense grid, refined by a bounded scalar search."""
    w = np.linspace(0.0, np.pi, points)
    gain = lambda t: np.linalg.norm(freq_response(A, B, C, D, np.exp(1j * t)), 2)  # noqa: E731
    gains = np.array([gain(t) for t in w])
    k = int(np.argmax(gains))
    step = w[1] - w[0]
    res = scipy.optimize.minimize_scalar(
        lambda t: -gain(t),
        bounds=(max(0.0, w[k] - step), min(np.pi, w[k] + step)),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return max(gains.max(), -res.fun)


def one_step_cov_trace(F1, A, B, E, Fbar, Lbar, p, M2, Ex, nu_var, Enu):
    """Trace of the one-step state covariance under switching with loss ``p``.

    ``x`` has second moment ``M2`` and mean ``Ex``; ``nu`` is independent of
    ``x`` with mean ``Enu`` and variance ``nu_var``. The expectation over the
    loss indicator is taken by enumerating both outcomes.
    """
    F1 = np.asarray(F1, float).ravel()
    Fbar = np.asarray(Fbar, float).ravel()
    F2 = (Fbar - (1 - p) * F1) / p
    L = Lbar / (1 - p)
    n = A.shape[0]
    Enu2 = nu_var + Enu**2
    # joint second moment of w = [x; nu]
    W = np.zeros((n + 1, n + 1))
    W[:n, :n] = M2
    W[:n, n] = W[n, :n] = Ex * Enu
    W[n, n] = Enu2
    Ew = np.append(Ex, Enu)
    b = B.ravel()
    e = E.ravel()
    second = np.zeros((n, n))
    mean = np.zeros(n)
    for delta, prob in ((1, 1 - p), (0, p)):
        K = A + np.outer(b, F1 if delta else F2)
        G = e + (b * L if delta else 0.0)
        T = np.hstack([K, G.reshape(-1, 1)])
        second += prob * T @ W @ T.T
        mean += prob * T @ Ew
    return float(np.trace(second - np.outer(mean, mean)))


def brute_force_f1(A, B, E, Fbar, Lbar, p, M2, Ex, nu_var, Enu, x0):
    fun = lambda f: one_step_cov_trace(f, A, B, E, Fbar, Lbar, p, M2, Ex, nu_var, Enu)  # noqa: E731
    res = scipy.optimize.minimize(fun, x0, method="BFGS", options={"gtol": 1e-12, "maxiter": 10_000})
    return res.x
