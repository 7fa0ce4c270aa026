"""Switching gains that keep the expected loop nominal and shrink its spread.

On a received predecessor input the controller applies ``F1 x + L nu``; on a
loss it applies ``F2 x``. With loss probability ``p`` the expected control
law is ``Fbar x + Lbar nu`` whenever ``(1-p) F1 + p F2 = Fbar`` and
``(1-p) L = Lbar``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lossycacc.errors import ConfigurationError, SynthesisError
from lossycacc.synthesis import NominalGains

_RIDGE = 1e-10


@dataclass
class GainSet:
    Fbar: np.ndarray
    Lbar: float
    F1: np.ndarray
    F2: np.ndarray
    L: float
    p: float
    g: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "Fbar": np.asarray(self.Fbar).ravel().tolist(),
            "Lbar": float(self.Lbar),
            "F1": np.asarray(self.F1).ravel().tolist(),
            "F2": np.asarray(self.F2).ravel().tolist(),
            "L": float(self.L),
            "p": float(self.p),
            "g": float(self.g),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GainSet":
        row = lambda key: np.asarray(data[key], dtype=float).reshape(1, -1)  # noqa: E731
        return cls(
            Fbar=row("Fbar"),
            Lbar=float(data["Lbar"]),
            F1=row("F1"),
            F2=row("F2"),
            L=float(data["L"]),
            p=float(data["p"]),
            g=float(data["g"]),
        )


def _check_p(p: float) -> None:
    if not 0.0 <= p < 1.0:
        raise ConfigurationError(f"loss probability must lie in [0, 1), got {p}")


def expectation_matching_gains(nominal: NominalGains, F1, p: float, g: float = float("nan")) -> GainSet:
    """Complete ``F1`` into a switching gain set whose mean law is nominal.

    At ``p = 0`` the loss branch is never taken, so ``F1`` and ``F2`` are both
    set to ``Fbar``.
    """
    _check_p(p)
    Fbar = np.atleast_2d(np.asarray(nominal.Fbar, dtype=float))
    if p == 0.0:
        return GainSet(Fbar=Fbar, Lbar=nominal.Lbar, F1=Fbar.copy(), F2=Fbar.copy(), L=nominal.Lbar, p=p, g=g)
    F1 = np.atleast_2d(np.asarray(F1, dtype=float)).reshape(Fbar.shape)
    F2 = (Fbar - (1.0 - p) * F1) / p
    L = nominal.Lbar / (1.0 - p)
    return GainSet(Fbar=Fbar, Lbar=nominal.Lbar, F1=F1, F2=F2, L=L, p=p, g=g)


def dc_gain(nominal: NominalGains, model) -> float:
    """Gain at ``z = 1`` of the nominal ``nu -> xi`` closed loop."""
    A = np.asarray(model.A, dtype=float)
    B = np.asarray(model.B, dtype=float)
    E = np.asarray(model.E, dtype=float)
    F = np.atleast_2d(nominal.Fbar)
    M = np.eye(A.shape[0]) - A - B @ F
    if np.linalg.cond(M) > 1e12:
        raise SynthesisError("I - A - B Fbar is singular: closed loop has a pole at z = 1")
    return float((F @ np.linalg.solve(M, E + B * nominal.Lbar))[0, 0] + nominal.Lbar)


def f1_static_approx(nominal: NominalGains, g: float, p: float) -> np.ndarray:
    """Constant covariance-reducing gain: a scalar multiple of ``Fbar``.

    The multiplier is ``1 - p/(1-p) * Lbar * (1 - Lbar/g) / g``.
    """
    _check_p(p)
    if g == 0:
        raise ConfigurationError("DC gain g must be nonzero")
    Lbar = nominal.Lbar
    factor = 1.0 - (p / (1.0 - p)) * Lbar * (1.0 - Lbar / g) / g
    return factor * np.atleast_2d(np.asarray(nominal.Fbar, dtype=float))


def f1_exact_timevarying(nominal: NominalGains, p: float, Ex, Cov, Enu) -> np.ndarray:
    """One-step variance-minimizing ``F1`` for given state and input moments.

    ``F1 = Fbar - p L E[nu] E[x]^T (Cov + E[x] E[x]^T)^-1`` with
    ``L = Lbar / (1-p)``. A ridge of ``1e-10 * trace`` is added when the
    second moment is singular.
    """
    _check_p(p)
    Fbar = np.atleast_2d(np.asarray(nominal.Fbar, dtype=float))
    Ex = np.asarray(Ex, dtype=float).reshape(-1, 1)
    Cov = np.atleast_2d(np.asarray(Cov, dtype=float))
    Enu = float(np.asarray(Enu, dtype=float).ravel()[0])
    if p == 0.0 or Enu == 0.0:
        return Fbar.copy()
    L = nominal.Lbar / (1.0 - p)
    second = Cov + Ex @ Ex.T
    if np.linalg.matrix_rank(second) < second.shape[0]:
        second = second + _RIDGE * max(np.trace(second), 1.0) * np.eye(second.shape[0])
    try:
        correction = np.linalg.solve(second.T, Ex).T
    except np.linalg.LinAlgError as exc:
        raise SynthesisError(f"second moment of x is singular: {exc}") from exc
    return Fbar - p * L * Enu * correction


def predict_inputs(nominal: NominalGains, model, nu) -> np.ndarray:
    """Response of the nominal ``nu -> xi`` closed loop to an input sequence.

    Starting from rest, this is the input the nominal controller would issue
    when its predecessor applies ``nu``; comparing it with the real input
    shows how well the low-order prediction works.
    """
    A = np.asarray(model.A, dtype=float)
    B = np.asarray(model.B, dtype=float)
    E = np.asarray(model.E, dtype=float)
    F = np.atleast_2d(nominal.Fbar)
    Acl = A + B @ F
    Bcl = (E + B * nominal.Lbar).ravel()
    F = F.ravel()
    nu = np.asarray(nu, dtype=float).ravel()
    x = np.zeros(A.shape[0])
    out = np.empty_like(nu)
    for k, v in enumerate(nu):
        out[k] = F @ x + nominal.Lbar * v
        x = Acl @ x + Bcl * v
    return out
