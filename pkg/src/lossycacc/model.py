"""Vehicle error dynamics and their exact sampled-data form."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lossycacc.errors import ConfigurationError

# Delay / Ts ratios closer than this to an integer are accepted as exact.
_DELAY_RATIO_TOL = 1e-9


def _steps(delay: float, Ts: float, name: str) -> int:
    if delay < 0:
        raise ConfigurationError(f"{name} must be nonnegative, got {delay}")
    ratio = delay / Ts
    steps = round(ratio)
    if abs(ratio - steps) > _DELAY_RATIO_TOL * max(1.0, ratio):
        raise ConfigurationError(f"{name}={delay} is not an integer multiple of Ts={Ts}")
    return int(steps)


@dataclass(frozen=True)
class VehicleParams:
    """Physical and timing constants of a homogeneous platoon.

    All times are in seconds. ``phi``, ``theta`` and ``psi`` (input,
    transmission and measurement delays) must be integer multiples of ``Ts``.
    """

    tau: float = 0.1
    h: float = 0.25
    phi: float = 0.2
    theta: float = 0.02
    psi: float = 0.05
    Ts: float = 0.01
    standstill_distance: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigurationError(f"tau must be positive, got {self.tau}")
        if not self.h > 0:
            raise ConfigurationError(f"h must be positive, got {self.h}")
        if not self.Ts > 0:
            raise ConfigurationError(f"Ts must be positive, got {self.Ts}")
        for name in ("phi", "theta", "psi"):
            _steps(getattr(self, name), self.Ts, name)

    @property
    def d(self) -> int:
        """Input delay in samples."""
        return _steps(self.phi, self.Ts, "phi")

    @property
    def r(self) -> int:
        """Transmission delay in samples."""
        return _steps(self.theta, self.Ts, "theta")

    @property
    def m(self) -> int:
        """Measurement delay in samples."""
        return _steps(self.psi, self.Ts, "psi")

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "h": self.h,
            "phi": self.phi,
            "theta": self.theta,
            "psi": self.psi,
            "Ts": self.Ts,
            "standstill_distance": self.standstill_distance,
        }


@dataclass(frozen=True)
class DiscreteModel:
    """Sampled error dynamics ``x+ = A x + B xi + E nu`` with outputs.

    ``y = C x`` is the measured output and ``z = Cz x + Dxi xi`` the
    performance output ``[eps * e, r * xi]``.
    """

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    C: np.ndarray
    Cz: np.ndarray
    Dxi: np.ndarray
    eps_weight: float
    r_weight: float
    params: VehicleParams | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.A.shape[0]


def continuous_error_matrices(params: VehicleParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(Ac, Bc, Ec)`` of the continuous error dynamics.

    The state is ``[e, de/dt, d2e/dt2 + (h/tau) u_i(t - phi)]``.
    """
    tau, h = params.tau, params.h
    Ac = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0 / tau]])
    Bc = np.array([[0.0], [-h / tau], [(h - tau) / tau**2]])
    Ec = np.array([[0.0], [0.0], [1.0 / tau]])
    return Ac, Bc, Ec


def zoh_matrices(tau: float, h: float, Ts: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form zero-order-hold ``(A, B, E)`` of the error dynamics."""
    if not tau > 0:
        raise ConfigurationError(f"tau must be positive, got {tau}")
    a = math.exp(-Ts / tau)
    one_minus_a = -math.expm1(-Ts / tau)
    th = tau - h
    A = np.array(
        [
            [1.0, Ts, tau * Ts - tau**2 * one_minus_a],
            [0.0, 1.0, tau * one_minus_a],
            [0.0, 0.0, a],
        ]
    )
    # Every exponential here decays, exp(-Ts/tau), including the middle
    # entry of B; this is what the exact hold integral gives.
    B = np.array(
        [
            [-(Ts**2) / 2 + Ts * th - tau * th * one_minus_a],
            [-Ts + th * one_minus_a],
            [-(th / tau) * one_minus_a],
        ]
    )
    E = np.array(
        [
            [Ts**2 / 2 - Ts * tau + tau**2 * one_minus_a],
            [Ts - tau * one_minus_a],
            [one_minus_a],
        ]
    )
    return A, B, E


def discretize(params: VehicleParams, weights: tuple[float, float] = (0.1, 1.0)) -> DiscreteModel:
    """Sample the error dynamics at ``params.Ts`` and attach the design outputs.

    ``weights`` is ``(eps, r)``: the spacing-error weight and the input weight
    in the performance output.
    """
    eps, r = weights
    if not (eps > 0 and r > 0):
        raise ConfigurationError(f"weights must be positive, got eps={eps}, r={r}")
    A, B, E = zoh_matrices(params.tau, params.h, params.Ts)
    C = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    Cz = np.array([[eps, 0.0, 0.0], [0.0, 0.0, 0.0]])
    Dxi = np.array([[0.0], [r]])
    return DiscreteModel(A=A, B=B, E=E, C=C, Cz=Cz, Dxi=Dxi, eps_weight=eps, r_weight=r, params=params)


def vehicle_zoh(tau: float, Ts: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact hold discretization of one vehicle's ``[q, v, a]`` kinematics.

    ``a' = (u - a) / tau``; the returned pair maps ``([q, v, a], u)`` to the
    next sample.
    """
    a = math.exp(-Ts / tau)
    one_minus_a = -math.expm1(-Ts / tau)
    Phi = np.array(
        [
            [1.0, Ts, tau * Ts - tau**2 * one_minus_a],
            [0.0, 1.0, tau * one_minus_a],
            [0.0, 0.0, a],
        ]
    )
    Gam = np.array([Ts**2 / 2 - Ts * tau + tau**2 * one_minus_a, Ts - tau * one_minus_a, one_minus_a])
    return Phi, Gam
