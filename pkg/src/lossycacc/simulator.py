"""Sampled-data simulation of a platoon over a lossy broadcast channel.

Vehicle 0 is the virtual leader: it follows a phantom vehicle that executes
the speed profile, using the nominal controller with full state and a
lossless link. Vehicles ``1..n`` are the platoon proper. Each of them

* measures ``[e, de/dt]`` with a delay of ``m`` samples,
* reconstructs the error state with the unknown-input observer,
* receives the predecessor's command from ``r`` samples earlier with
  probability ``1 - p``,
* stacks the estimate with its input histories into the lifted state and
  applies the switching (or baseline) law, which reaches the engine ``d``
  samples later.

Random streams are derived with :class:`numpy.random.SeedSequence` so that
run ``j``, vehicle ``i``, stream ``s`` (0 = losses, 1 = measurement noise)
always uses ``SeedSequence(seed, spawn_key=(j, i, s))`` regardless of how many
runs are batched together. A single scenario run is run index 0.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from lossycacc.errors import ConfigurationError
from lossycacc.model import VehicleParams, vehicle_zoh
from lossycacc.observer import ObserverGains
from lossycacc.stochastic import GainSet

CONTROLLER_MODES = ("switching", "non_switching_hold", "oracle_timevarying")
NU_FILL_POLICIES = ("hold", "zero", "exact", "unbiased")
STATE_SOURCES = ("observer", "exact")
LOSS_STREAM, NOISE_STREAM = 0, 1

DEFAULT_LEADER_PROFILE = ((0.0, 0.0), (10.0, 17.0))


@dataclass
class SimConfig:
    """Everything needed to reproduce one simulation (or a batch of them).

    ``leader_profile`` is a list of ``(time_s, speed_mps)`` knots; speed is
    interpolated linearly between knots and held after the last one.
    ``nu_fill`` decides what the controller stores in the predecessor-input
    history for samples it did not receive:

    ``hold``      last received value (default)
    ``zero``      zero
    ``unbiased``  received samples scaled by ``1/(1-p)``, zero otherwise
    ``exact``     the true predecessor input, lost or not

    ``state_source="exact"`` bypasses the observer and feeds the true error
    state. Together with ``nu_fill="exact"`` this is the full-information
    loop the switching gains are designed for; neither is implementable on
    a real vehicle.
    """

    n_vehicles: int
    params: VehicleParams
    gains: GainSet
    observer: ObserverGains
    p_loss: float = 0.0
    seed: int = 0
    horizon: int = 6000
    leader_profile: tuple = DEFAULT_LEADER_PROFILE
    controller_mode: str = "switching"
    noise_amplitude: float = 0.0
    mc_runs: int = 1
    nu_fill: str = "hold"
    state_source: str = "observer"
    substeps: int = 1

    def __post_init__(self):
        if self.n_vehicles < 1:
            raise ConfigurationError("n_vehicles must be at least 1")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be at least 1")
        if not 0.0 <= self.p_loss < 1.0:
            raise ConfigurationError(f"p_loss must lie in [0, 1), got {self.p_loss}")
        if self.controller_mode not in CONTROLLER_MODES:
            raise ConfigurationError(f"unknown controller_mode {self.controller_mode!r}")
        if self.nu_fill not in NU_FILL_POLICIES:
            raise ConfigurationError(f"unknown nu_fill {self.nu_fill!r}")
        if self.state_source not in STATE_SOURCES:
            raise ConfigurationError(f"unknown state_source {self.state_source!r}")
        if not 0.0 <= self.noise_amplitude <= 0.05:
            raise ConfigurationError("noise_amplitude must lie in [0, 0.05]")
        if self.mc_runs < 1 or self.substeps < 1:
            raise ConfigurationError("mc_runs and substeps must be positive")
        profile = tuple((float(t), float(v)) for t, v in self.leader_profile)
        times = [t for t, _ in profile]
        if not profile or any(b < a for a, b in zip(times, times[1:])):
            raise ConfigurationError("leader_profile times must be nondecreasing")
        self.leader_profile = profile
        if self.params.d < 1:
            raise ConfigurationError("the lifted controller needs an input delay of at least one sample")
        N = 3 + 2 * self.params.d
        for name in ("Fbar", "F1", "F2"):
            if np.asarray(getattr(self.gains, name)).size != N:
                raise ConfigurationError(f"gain {name} has {np.asarray(getattr(self.gains, name)).size} entries, expected {N}")

    def to_dict(self) -> dict:
        return {
            "n_vehicles": self.n_vehicles,
            "params": self.params.to_dict(),
            "gains": self.gains.to_dict(),
            "observer": self.observer.to_dict(),
            "p_loss": self.p_loss,
            "seed": self.seed,
            "horizon": self.horizon,
            "leader_profile": [list(k) for k in self.leader_profile],
            "controller_mode": self.controller_mode,
            "noise_amplitude": self.noise_amplitude,
            "mc_runs": self.mc_runs,
            "nu_fill": self.nu_fill,
            "state_source": self.state_source,
            "substeps": self.substeps,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class SimRun:
    """Logged trajectories of one run; arrays are ``(horizon, n_vehicles + 1)``.

    Column 0 is the virtual leader. ``x_hat`` has a trailing axis of 3.
    """

    q: np.ndarray
    v: np.ndarray
    a: np.ndarray
    e: np.ndarray
    u: np.ndarray
    delta: np.ndarray
    x_hat: np.ndarray
    x: np.ndarray
    Ts: float
    seed: int
    run_index: int
    digest: str

    @property
    def horizon(self) -> int:
        return self.u.shape[0]

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.horizon) * self.Ts


@dataclass
class EnsembleSummary:
    """Per-step ensemble statistics over Monte Carlo runs.

    Arrays are ``(horizon, n_vehicles + 1)`` except ``x_cov`` which adds two
    trailing axes of size 3.
    """

    u_mean: np.ndarray
    u_var: np.ndarray
    e_mean: np.ndarray
    e_var: np.ndarray
    x_mean: np.ndarray
    x_cov: np.ndarray
    runs: int
    Ts: float
    seed: int
    digest: str
    run_u_l2: np.ndarray = field(repr=False)
    run_u_var: np.ndarray = field(repr=False)

    @property
    def u_se(self) -> np.ndarray:
        return np.sqrt(self.u_var / self.runs)


def run_stream(seed: int, run_index: int, vehicle: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(run_index, vehicle, stream)))


def leader_commands(profile, Ts: float, horizon: int) -> np.ndarray:
    """Phantom commands: mean slope of the speed profile over each sample."""
    times = np.array([t for t, _ in profile])
    speeds = np.array([v for _, v in profile])
    edges = np.arange(horizon + 1) * Ts
    v_edges = np.interp(edges, times, speeds, left=speeds[0], right=speeds[-1])
    return np.diff(v_edges) / Ts


# Products go through einsum rather than BLAS so that each run's arithmetic
# does not depend on how many runs share the batch.
def _apply(M: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``M`` applied to the trailing axis of ``X``."""
    return np.einsum("ij,...j->...i", M, X)


def _dot(X: np.ndarray, f: np.ndarray) -> np.ndarray:
    return np.einsum("...j,j->...", X, f)


class _Batch:
    """Vectorized state of ``R`` independent runs of the same scenario."""

    def __init__(self, config: SimConfig, run_indices):
        self.cfg = config
        P = config.params
        self.R = len(run_indices)
        self.n = config.n_vehicles
        self.V = self.n + 1
        self.K = config.horizon
        self.d, self.m, self.r = P.d, P.m, P.r
        self.Ts, self.h, self.tau = P.Ts, P.h, P.tau

        sub_Ts = P.Ts / config.substeps
        Phi, Gam = vehicle_zoh(P.tau, sub_Ts)
        self.Phi, self.Gam = Phi, Gam

        g = config.gains
        self.Fbar = np.asarray(g.Fbar, dtype=float).ravel()
        self.F1 = np.asarray(g.F1, dtype=float).ravel()
        self.F2 = np.asarray(g.F2, dtype=float).ravel()
        self.Lbar, self.L, self.p = float(g.Lbar), float(g.L), config.p_loss
        ob = config.observer
        self.obF, self.obGB, self.obK, self.obH = ob.F, ob.GB.ravel(), ob.K, ob.H

        R, K, V = self.R, self.K, self.V
        # Loss and noise draws are fixed up front, one stream per (run, vehicle).
        self.delta = np.ones((R, K, V), dtype=np.int8)
        self.noise = np.zeros((R, K, V, 2))
        for j, run in enumerate(run_indices):
            for i in range(1, V):
                draws = run_stream(config.seed, run, i, LOSS_STREAM).random(K)
                self.delta[j, :, i] = draws >= config.p_loss
                if config.noise_amplitude > 0:
                    self.noise[j, :, i] = run_stream(config.seed, run, i, NOISE_STREAM).uniform(-1.0, 1.0, (K, 2))
        self.noise *= config.noise_amplitude

        self.u_ph = leader_commands(config.leader_profile, P.Ts, K)

        # Physical state [q, v, a]; everyone at rest with zero spacing error.
        self.s = np.zeros((R, V, 3))
        self.s[:, :, 0] = -P.standstill_distance * np.arange(V)
        self.s_ph = np.zeros(3)
        self.s_ph[0] = P.standstill_distance
        # Gaps to the predecessor are propagated on their own: differencing
        # absolute positions would lose ~1e-13 m, which the deadbeat observer
        # amplifies by its large output gains.
        self.gap = np.zeros((R, V, 3))
        self.gap[:, :, 0] = P.standstill_distance

        self.u = np.zeros((R, K, V))
        self.nu_known = np.zeros((R, K, V))
        self.nu_held = np.zeros((R, V))
        self.zeta = np.zeros((R, V, 3))
        self.log_s = np.zeros((R, K, V, 3))
        self.log_x = np.zeros((R, K, V, 3))
        self.log_xhat = np.zeros((R, K, V, 3))
        self.log_ph_u = np.zeros(K)

    # --- helpers -----------------------------------------------------------
    def _past(self, arr: np.ndarray, k: int, lag: int) -> np.ndarray:
        """``arr[:, k - lag]`` with zeros before time 0."""
        j = k - lag
        if j < 0:
            return np.zeros(arr.shape[:1] + arr.shape[2:])
        return arr[:, j]

    def _window(self, arr: np.ndarray, k: int) -> np.ndarray:
        """Samples ``k-d .. k-1`` of ``arr`` as ``(R, V, d)``, oldest first."""
        d = self.d
        out = np.zeros((self.R, self.V, d))
        lo = max(0, k - d)
        if k > lo:
            out[:, :, d - (k - lo) :] = np.swapaxes(arr[:, lo:k], 1, 2)
        return out

    def error_state(self, s: np.ndarray, gap: np.ndarray) -> np.ndarray:
        """``[e, de/dt, x3]`` from own state ``s`` and ``gap = s_pred - s``."""
        h, tau = self.h, self.tau
        sd = self.cfg.params.standstill_distance
        e = gap[..., 0] - sd - h * s[..., 1]
        de = gap[..., 1] - h * s[..., 2]
        x3 = gap[..., 2] + (h / tau) * s[..., 2]
        return np.stack([e, de, x3], axis=-1)

    def _all_error_states(self) -> np.ndarray:
        return self.error_state(self.s, self.gap)

    # --- main loop -----------------------------------------------------------
    def run(self, moments_hook=None) -> None:
        cfg = self.cfg
        mode = cfg.controller_mode
        R, V, d, m, r = self.R, self.V, self.d, self.m, self.r
        for k in range(self.K):
            x = self._all_error_states()
            self.log_s[:, k] = self.s
            self.log_x[:, k] = x

            # Leader: exact lifted state, phantom command known without loss.
            xi_win = self._window(self.u, k)
            ph_win = np.zeros(d)
            lo = max(0, k - d)
            if k > lo:
                ph_win[d - (k - lo) :] = self.u_ph[lo:k]
            xe0 = np.concatenate([x[:, 0], xi_win[:, 0], np.broadcast_to(ph_win, (R, d))], axis=1)
            self.u[:, k, 0] = _dot(xe0, self.Fbar) + self.Lbar * self.u_ph[k]
            self.log_xhat[:, k, 0] = x[:, 0]
            self.nu_known[:, k, 0] = self.u_ph[k]

            # Followers: delayed noisy measurement through the observer.
            x_meas = self.log_x[:, k - m] if k >= m else np.zeros((R, V, 3))
            y = x_meas[:, 1:, :2] * (1.0 + self.noise[:, k, 1:])
            x_hat = self.zeta[:, 1:] + _apply(self.obH, y)
            if cfg.state_source == "exact":
                x_hat = x[:, 1:]
            self.log_xhat[:, k, 1:] = x_hat
            xi_d = self._past(self.u, k, d + m)[:, 1:]
            self.zeta[:, 1:] = _apply(self.obF, self.zeta[:, 1:]) + xi_d[..., None] * self.obGB + _apply(self.obK, y)

            nu_win = self._window(self.nu_known, k)[:, 1:]
            xe = np.concatenate([x_hat, xi_win[:, 1:], nu_win], axis=2)
            delta = self.delta[:, k, 1:].astype(float)
            if r >= 1:
                self._control_followers(k, xe, delta, self._past(self.u, k, r)[:, :-1], mode, moments_hook)
            else:
                for i in range(1, V):
                    cols = slice(i - 1, i)
                    self._control_followers(
                        k, xe[:, cols], delta[:, cols], self.u[:, k, i - 1 : i], mode, moments_hook, first=i
                    )

            # Physics: each engine sees its own command from d samples ago.
            u_eng = self._past(self.u, k, d)
            u_ph_eng = self.u_ph[k - d] if k >= d else 0.0
            u_pred_eng = np.concatenate([np.full((R, 1), u_ph_eng), u_eng[:, :-1]], axis=1)
            for _ in range(cfg.substeps):
                self.s = _apply(self.Phi, self.s) + u_eng[..., None] * self.Gam
                self.s_ph = self.Phi @ self.s_ph + u_ph_eng * self.Gam
                self.gap = _apply(self.Phi, self.gap) + (u_pred_eng - u_eng)[..., None] * self.Gam

    def _control_followers(self, k, xe, delta, nu, mode, moments_hook, first: int = 1) -> None:
        cols = slice(first, first + xe.shape[1])
        received = delta > 0
        if mode == "non_switching_hold":
            # The baseline always substitutes the last received value.
            held = np.where(received, nu, self.nu_held[:, cols])
            self.nu_held[:, cols] = held
            u = _dot(xe, self.Fbar) + self.Lbar * held
            known = nu if self.cfg.nu_fill == "exact" else held
        else:
            F1 = self.F1
            if mode == "oracle_timevarying":
                F1 = moments_hook(xe, nu)
                u_on = np.einsum("rvn,vn->rv", xe, F1) + self.L * nu
                F2 = (self.Fbar[None, :] - (1.0 - self.p) * F1) / self.p if self.p > 0 else F1
                u_off = np.einsum("rvn,vn->rv", xe, F2)
            else:
                u_on = _dot(xe, F1) + self.L * nu
                u_off = _dot(xe, self.F2)
            u = np.where(received, u_on, u_off)
            if self.cfg.nu_fill == "hold":
                known = np.where(received, nu, self.nu_held[:, cols])
            elif self.cfg.nu_fill == "exact":
                known = nu
            elif self.cfg.nu_fill == "unbiased":
                known = np.where(received, nu / (1.0 - self.p), 0.0)
            else:
                known = np.where(received, nu, 0.0)
            self.nu_held[:, cols] = np.where(received, nu, self.nu_held[:, cols])
        self.u[:, k, cols] = u
        self.nu_known[:, k, cols] = known

    def to_run(self, j: int, run_index: int) -> SimRun:
        s = self.log_s[j]
        return SimRun(
            q=s[..., 0].copy(),
            v=s[..., 1].copy(),
            a=s[..., 2].copy(),
            e=self.log_x[j, ..., 0].copy(),
            u=self.u[j].copy(),
            delta=self.delta[j].copy(),
            x_hat=self.log_xhat[j].copy(),
            x=self.log_x[j].copy(),
            Ts=self.cfg.params.Ts,
            seed=self.cfg.seed,
            run_index=run_index,
            digest=self.cfg.digest(),
        )


def _oracle_hook(batch: _Batch):
    """Time-varying ``F1`` from the batch's own ensemble moments."""
    from lossycacc.stochastic import f1_exact_timevarying
    from lossycacc.synthesis import NominalGains

    nominal = NominalGains(Fbar=batch.Fbar.reshape(1, -1), Lbar=batch.Lbar, gamma=float("nan"))

    def hook(xe: np.ndarray, nu: np.ndarray) -> np.ndarray:
        out = np.empty((xe.shape[1], xe.shape[2]))
        for v in range(xe.shape[1]):
            Ex = xe[:, v].mean(axis=0)
            Cov = np.cov(xe[:, v], rowvar=False, bias=True)
            out[v] = f1_exact_timevarying(nominal, batch.p, Ex, Cov, nu[:, v].mean()).ravel()
        return out

    return hook


def simulate_batch(config: SimConfig, run_indices) -> _Batch:
    batch = _Batch(config, list(run_indices))
    hook = None
    if config.controller_mode == "oracle_timevarying":
        if batch.R < 2:
            raise ConfigurationError("oracle_timevarying needs an ensemble of at least 2 runs")
        hook = _oracle_hook(batch)
    batch.run(hook)
    return batch


def run_scenario(config: SimConfig) -> SimRun:
    """Simulate run index 0 of ``config`` and return its full log."""
    return simulate_batch(config, [0]).to_run(0, 0)


def _batch_sums(config: SimConfig, start: int, stop: int) -> dict:
    b = simulate_batch(config, range(start, stop))
    u, x = b.u, b.log_x
    return {
        "u": u.sum(axis=0),
        "uu": (u * u).sum(axis=0),
        "x": x.sum(axis=0),
        "xx": np.einsum("rkvi,rkvj->kvij", x, x),
        "run_u_l2": np.sqrt(config.params.Ts * (u * u).sum(axis=1)),
        "run_u_var": u.var(axis=1),
    }


def max_workers() -> int:
    """Worker cap for Monte Carlo batches, from ``LOSSYCACC_MAX_WORKERS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("LOSSYCACC_MAX_WORKERS", "1")))
    except ValueError:
        return 1


def run_monte_carlo(
    config: SimConfig, mc_runs: int | None = None, batch_size: int = 2000, workers: int | None = None
) -> EnsembleSummary:
    """Ensemble statistics over ``mc_runs`` independent loss realizations.

    Runs are split into index-ordered batches; batches may run in separate
    processes but are always reduced in index order, so the result does not
    depend on ``batch_size`` or ``workers`` beyond floating-point summation
    order within a batch.
    """
    runs = config.mc_runs if mc_runs is None else mc_runs
    if runs < 2:
        raise ConfigurationError("run_monte_carlo needs at least 2 runs")
    if config.controller_mode == "oracle_timevarying":
        batch_size = runs
    bounds = [(s, min(runs, s + batch_size)) for s in range(0, runs, batch_size)]
    workers = min(max_workers() if workers is None else workers, len(bounds))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_batch_sums, [config] * len(bounds), *zip(*bounds)))
    else:
        parts = [_batch_sums(config, a, b) for a, b in bounds]

    tot = {key: sum(part[key] for part in parts) for key in ("u", "uu", "x", "xx")}
    corr = runs / (runs - 1)
    u_mean = tot["u"] / runs
    x_mean = tot["x"] / runs
    x_cov = (tot["xx"] / runs - np.einsum("kvi,kvj->kvij", x_mean, x_mean)) * corr
    return EnsembleSummary(
        u_mean=u_mean,
        u_var=np.maximum(tot["uu"] / runs - u_mean**2, 0.0) * corr,
        e_mean=x_mean[..., 0],
        e_var=np.maximum(x_cov[..., 0, 0], 0.0),
        x_mean=x_mean,
        x_cov=x_cov,
        runs=runs,
        Ts=config.params.Ts,
        seed=config.seed,
        digest=config.digest(),
        run_u_l2=np.concatenate([part["run_u_l2"] for part in parts]),
        run_u_var=np.concatenate([part["run_u_var"] for part in parts]),
    )
