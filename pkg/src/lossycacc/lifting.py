"""Delay augmentation of the error dynamics.

Index map of the lifted state for base order ``n`` and delay ``d``::

    [0, n)              x(k)
    n                   xi(k-d)
    [n+1, n+d)          xi(k-d+1) ... xi(k-1)      oldest first
    n+d                 nu(k-d)
    [n+d+1, n+2d)       nu(k-d+1) ... nu(k-1)      oldest first

Each chain shifts towards its oldest slot every step and the newest slot is
loaded from the current input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lossycacc.errors import ConfigurationError
from lossycacc.model import DiscreteModel


@dataclass(frozen=True)
class LiftedModel:
    Ad: np.ndarray
    Bd: np.ndarray
    Ed: np.ndarray
    Cd: np.ndarray
    R_perf: np.ndarray
    d: int
    base: DiscreteModel

    @property
    def N(self) -> int:
        return self.Ad.shape[0]

    # Aliases so synthesis code can treat base and lifted models alike.
    @property
    def A(self) -> np.ndarray:
        return self.Ad

    @property
    def B(self) -> np.ndarray:
        return self.Bd

    @property
    def E(self) -> np.ndarray:
        return self.Ed

    @property
    def Cz(self) -> np.ndarray:
        return self.Cd

    @property
    def Dxi(self) -> np.ndarray:
        return self.R_perf

    @property
    def n(self) -> int:
        return self.N

    def xi_slice(self) -> slice:
        n = self.base.n
        return slice(n, n + self.d)

    def nu_slice(self) -> slice:
        n = self.base.n
        return slice(n + self.d, n + 2 * self.d)


def lift(model: DiscreteModel, d: int) -> LiftedModel:
    """Embed a ``d``-step delay on both inputs into the state."""
    if d < 1:
        raise ConfigurationError(f"lifting needs d >= 1, got {d}; use the base model directly")
    n = model.n
    N = n + 2 * d
    Ad = np.zeros((N, N))
    Ad[:n, :n] = model.A
    Ad[:n, n] = model.B[:, 0]
    Ad[:n, n + d] = model.E[:, 0]
    for start in (n, n + d):
        for j in range(d - 1):
            Ad[start + j, start + j + 1] = 1.0
    Bd = np.zeros((N, 1))
    Bd[n + d - 1, 0] = 1.0
    Ed = np.zeros((N, 1))
    Ed[n + 2 * d - 1, 0] = 1.0
    Cd = np.zeros((model.Cz.shape[0], N))
    Cd[:, :n] = model.Cz
    return LiftedModel(Ad=Ad, Bd=Bd, Ed=Ed, Cd=Cd, R_perf=model.Dxi.copy(), d=d, base=model)


def assemble_lifted_state(x_hat, xi_history, nu_history) -> np.ndarray:
    """Stack an estimate and input histories into a lifted state.

    Histories hold exactly ``d`` samples ordered oldest first, i.e.
    ``[u(k-d), ..., u(k-1)]``. Lost predecessor samples must already be
    filled in by the caller.
    """
    xi_history = np.asarray(xi_history, dtype=float).ravel()
    nu_history = np.asarray(nu_history, dtype=float).ravel()
    if xi_history.size != nu_history.size or xi_history.size < 1:
        raise ValueError(
            f"history lengths must match and be >= 1, got {xi_history.size} and {nu_history.size}"
        )
    return np.concatenate([np.asarray(x_hat, dtype=float).ravel(), xi_history, nu_history])


def split_lifted_state(xe, n: int, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`assemble_lifted_state`."""
    xe = np.asarray(xe, dtype=float).ravel()
    if xe.size != n + 2 * d:
        raise ValueError(f"expected length {n + 2 * d}, got {xe.size}")
    return xe[:n].copy(), xe[n : n + d].copy(), xe[n + d :].copy()
