"""Deadbeat unknown-input observer for the (unlifted) error dynamics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lossycacc.errors import SynthesisError

_CE_SV_MIN = 1e-9


@dataclass(frozen=True)
class ObserverGains:
    """Gains of ``zeta+ = F zeta + G B xi_d + K y``, ``x_hat = zeta + H y``."""

    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    K: np.ndarray
    GB: np.ndarray

    def to_dict(self) -> dict:
        return {name: getattr(self, name).tolist() for name in ("F", "G", "H", "K1", "K2", "K", "GB")}

    @classmethod
    def from_dict(cls, data: dict) -> "ObserverGains":
        return cls(**{k: np.asarray(v, dtype=float) for k, v in data.items()})


def _observability(A: np.ndarray, c: np.ndarray) -> np.ndarray:
    rows = [c]
    for _ in range(A.shape[0] - 1):
        rows.append(rows[-1] @ A)
    return np.vstack(rows)


def _deadbeat_gain(A1: np.ndarray, C: np.ndarray) -> np.ndarray:
    """``K1`` placing every eigenvalue of ``A1 - K1 C`` at zero.

    Output rows are tried in order (then their sum); the first one that
    observes ``A1`` on its own gets an Ackermann gain and the other columns
    of ``K1`` stay zero.
    """
    n, q = A1.shape[0], C.shape[0]
    weights = [np.eye(q)[j] for j in range(q)] + [np.ones(q)]
    for w in weights:
        c = (w @ C).reshape(1, n)
        O = _observability(A1, c)
        if np.linalg.matrix_rank(O) < n:
            continue
        en = np.zeros((n, 1))
        en[-1, 0] = 1.0
        k = np.linalg.matrix_power(A1, n) @ np.linalg.solve(O, en)
        return k @ w.reshape(1, q)
    raise SynthesisError("no output combination observes (A - HCA); cannot place deadbeat poles")


def synthesize_uio(model) -> ObserverGains:
    """Observer decoupled from the predecessor input with all poles at 0.

    Raises
    ------
    SynthesisError
        If ``C E`` is not injective or ``(A - HCA, C)`` is unobservable.
    """
    A, B, E, C = (np.asarray(M, dtype=float) for M in (model.A, model.B, model.E, model.C))
    n = A.shape[0]
    CE = C @ E
    if np.linalg.svd(CE, compute_uv=False).min() <= _CE_SV_MIN:
        raise SynthesisError("C E is not injective; the unknown input cannot be decoupled")
    H = E @ np.linalg.solve(CE.T @ CE, CE.T)
    G = np.eye(n) - H @ C
    A1 = A - H @ C @ A
    if np.linalg.matrix_rank(_observability(A1, C)) < n:
        raise SynthesisError("(A - HCA, C) is not observable")
    K1 = _deadbeat_gain(A1, C)
    F = A1 - K1 @ C
    K2 = F @ H
    return ObserverGains(F=F, G=G, H=H, K1=K1, K2=K2, K=K1 + K2, GB=G @ B)


def observer_step(gains: ObserverGains, zeta, y, xi_d) -> tuple[np.ndarray, np.ndarray]:
    """Advance the observer one sample.

    Returns ``(zeta_next, x_hat)`` where ``x_hat = zeta + H y`` is the
    estimate at the current sample.
    """
    zeta = np.asarray(zeta, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    x_hat = zeta + gains.H @ y
    zeta_next = gains.F @ zeta + gains.GB.ravel() * float(xi_d) + gains.K @ y
    return zeta_next, x_hat
