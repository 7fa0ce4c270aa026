"""String-stability and closed-loop norm measurements."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

STRING_STABLE_TOL = 1e-3
_RATIO_DENOM_MIN = 1e-12


def closed_loop_norm(Acl, Bcl, Ccl, Dcl, grid_points: int = 2048, chunk: int = 256) -> float:
    """Peak largest singular value of ``C (zI - A)^-1 B + D`` on the unit circle.

    The grid is ``exp(2j*pi*k/grid_points)``; only the upper half is
    evaluated since the system is real. Returns ``inf`` for a non-Schur
    ``Acl``.
    """
    Acl, Bcl, Ccl, Dcl = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (Acl, Bcl, Ccl, Dcl))
    n = Acl.shape[0]
    if n and np.abs(np.linalg.eigvals(Acl)).max() >= 1.0:
        return float("inf")
    k = np.arange(grid_points // 2 + 1)
    z = np.exp(2j * np.pi * k / grid_points)
    peak = 0.0
    eye = np.eye(n)
    for start in range(0, z.size, chunk):
        zc = z[start : start + chunk]
        if n:
            pencil = zc[:, None, None] * eye - Acl
            X = np.linalg.solve(pencil, np.broadcast_to(Bcl, (zc.size,) + Bcl.shape))
            T = Ccl @ X + Dcl
        else:
            T = np.broadcast_to(Dcl, (zc.size,) + Dcl.shape)
        peak = max(peak, float(np.linalg.norm(T, ord=2, axis=(1, 2)).max()))
    return peak


def l2_norm(signal, Ts: float, axis: int = 0) -> np.ndarray:
    """Discrete L2 norm ``sqrt(Ts * sum(s**2))``."""
    s = np.asarray(signal, dtype=float)
    return np.sqrt(Ts * np.sum(s * s, axis=axis))


@dataclass
class StabilityReport:
    """Per-vehicle L2 figures of one simulated run.

    Index 0 is the virtual leader; ratios at index ``i`` compare vehicle ``i``
    with its predecessor and are ``None`` at index 0 or where the predecessor
    input has (numerically) zero energy.
    """

    u_norm: list[float]
    z_norm: list[float]
    ratio_u: list[float | None]
    ratio_z: list[float | None]
    max_ratio: float | None
    string_stable: bool
    peak_error: list[float]
    tol: float = STRING_STABLE_TOL

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def verdict_line(self) -> str:
        max_ratio = "nan" if self.max_ratio is None else f"{self.max_ratio:.6f}"
        return f"STRING_STABLE={'true' if self.string_stable else 'false'} max_ratio={max_ratio}"


def _ratios(num: np.ndarray, den: np.ndarray) -> list[float | None]:
    out: list[float | None] = [None]
    for i in range(1, num.size):
        out.append(float(num[i] / den[i - 1]) if den[i - 1] >= _RATIO_DENOM_MIN else None)
    return out


def l2_ratios(run, weights: tuple[float, float] = (0.1, 1.0), tol: float = STRING_STABLE_TOL) -> StabilityReport:
    """String-stability report for a simulated run.

    ``run`` needs ``u`` and ``e`` arrays shaped ``(horizon, vehicles)`` and a
    sampling period ``Ts``. The verdict covers every follower, including the
    first one against the virtual leader.
    """
    u = np.asarray(run.u, dtype=float)
    e = np.asarray(run.e, dtype=float)
    if u.shape[0] < 2:
        raise ValueError("l2_ratios needs a horizon of at least 2 steps")
    eps, r = weights
    Ts = run.Ts
    u_norm = l2_norm(u, Ts)
    z_norm = np.sqrt(eps**2 * l2_norm(e, Ts) ** 2 + r**2 * u_norm**2)
    ratio_u = _ratios(u_norm, u_norm)
    ratio_z = _ratios(z_norm, u_norm)
    defined = [x for x in ratio_u[1:] if x is not None]
    max_ratio = max(defined) if defined else None
    stable = max_ratio is not None and max_ratio <= 1.0 + tol
    return StabilityReport(
        u_norm=[float(x) for x in u_norm],
        z_norm=[float(x) for x in z_norm],
        ratio_u=ratio_u,
        ratio_z=ratio_z,
        max_ratio=max_ratio,
        string_stable=bool(stable),
        peak_error=[float(x) for x in np.abs(e).max(axis=0)],
        tol=tol,
    )
