"""Command-line entry point: ``lossycacc synthesize | simulate | compare``.

Exit codes: 0 success, 2 infeasible synthesis, 3 validation error,
4 gains bundle does not match the scenario.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from lossycacc import __version__
from lossycacc.errors import ConfigurationError, PreconditionError, SynthesisError
from lossycacc.export import dump_json, summary_dict, write_run, write_series_csv
from lossycacc.lifting import lift
from lossycacc.metrics import l2_ratios
from lossycacc.model import VehicleParams, discretize
from lossycacc.observer import ObserverGains, synthesize_uio
from lossycacc.simulator import DEFAULT_LEADER_PROFILE, SimConfig, run_monte_carlo, run_scenario
from lossycacc.stochastic import GainSet, dc_gain, expectation_matching_gains, f1_static_approx, predict_inputs
from lossycacc.synthesis import NominalGains, min_gamma

log = logging.getLogger("lossycacc")

EXIT_OK, EXIT_INFEASIBLE, EXIT_INVALID, EXIT_DIGEST = 0, 2, 3, 4
BUNDLE_NAME = "gains.json"

_DEFAULTS = {
    "name": "custom",
    "n_vehicles": 14,
    "params": VehicleParams().to_dict(),
    "p_loss": 0.0,
    "seed": 0,
    "horizon": 6000,
    "leader_profile": [list(k) for k in DEFAULT_LEADER_PROFILE],
    "controller_mode": "switching",
    "noise_amplitude": 0.0,
    "mc_runs": 1,
    "nu_fill": "hold",
    "state_source": "observer",
    "substeps": 1,
    "weights": [0.1, 1.0],
    "gamma_tol": 1e-3,
    "gamma_hi": 100.0,
    "predicted_inputs": False,
    "output_dir": None,
}

PRESETS = {
    "fig2": {"name": "fig2", "n_vehicles": 8, "predicted_inputs": True},
    "fig4": {"name": "fig4"},
    "fig5_switching": {"name": "fig5_switching", "p_loss": 0.8},
    "fig5_nonswitching": {"name": "fig5_nonswitching", "p_loss": 0.8, "controller_mode": "non_switching_hold"},
    "fig6_switching": {"name": "fig6_switching", "p_loss": 0.9},
    "fig6_nonswitching": {"name": "fig6_nonswitching", "p_loss": 0.9, "controller_mode": "non_switching_hold"},
    "noise_1pct": {"name": "noise_1pct", "noise_amplitude": 0.01},
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def load_scenario(path=None, preset=None) -> dict:
    """Merge defaults, an optional preset, and an optional JSON file.

    Unknown keys (top level or inside ``params``) are rejected, and physical
    values are validated by constructing :class:`VehicleParams`.
    """
    scen = copy.deepcopy(_DEFAULTS)
    layers = []
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigurationError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        layers.append(PRESETS[preset])
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read scenario {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("scenario file must hold a JSON object")
        layers.append(data)
    for layer in layers:
        unknown = set(layer) - set(_DEFAULTS)
        if unknown:
            raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
        for key, value in layer.items():
            if key == "params":
                if not isinstance(value, dict):
                    raise ConfigurationError("params must be an object")
                bad = set(value) - set(_DEFAULTS["params"])
                if bad:
                    raise ConfigurationError(f"unknown params keys: {sorted(bad)}")
                scen["params"].update(value)
            else:
                scen[key] = copy.deepcopy(value)
    try:
        VehicleParams(**scen["params"])
        eps, r = (float(w) for w in scen["weights"])
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid scenario values: {exc}") from exc
    if not (eps > 0 and r > 0):
        raise ConfigurationError("weights must be positive")
    if not 0.0 <= float(scen["p_loss"]) < 1.0:
        raise ConfigurationError("p_loss must lie in [0, 1)")
    return scen


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def design_digest(scen: dict) -> str:
    """Hash of everything that determines the gains bundle."""
    keys = ("params", "weights", "gamma_tol", "gamma_hi", "p_loss")
    return hashlib.sha256(_canonical({k: scen[k] for k in keys}).encode()).hexdigest()


def synthesize_bundle(scen: dict) -> dict:
    params = VehicleParams(**scen["params"])
    model = discretize(params, tuple(scen["weights"]))
    lifted = lift(model, params.d)
    gamma_star, nominal = min_gamma(lifted, tol=scen["gamma_tol"], gamma_hi=scen["gamma_hi"])
    g = dc_gain(nominal, lifted)
    p = float(scen["p_loss"])
    gains = expectation_matching_gains(nominal, f1_static_approx(nominal, g, p), p, g=g)
    observer = synthesize_uio(model)
    return {
        "version": __version__,
        "design_digest": design_digest(scen),
        "order": lifted.N,
        "gamma_star": gamma_star,
        "g": g,
        "solver": {k: nominal.info[k] for k in sorted(nominal.info)},
        "gains": gains.to_dict(),
        "observer": observer.to_dict(),
    }


def write_bundle(bundle: dict, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / BUNDLE_NAME
    dump_json(bundle, path)
    return path


def _sim_config(scen: dict, gains: GainSet, observer: ObserverGains) -> SimConfig:
    return SimConfig(
        n_vehicles=int(scen["n_vehicles"]),
        params=VehicleParams(**scen["params"]),
        gains=gains,
        observer=observer,
        p_loss=float(scen["p_loss"]),
        seed=int(scen["seed"]),
        horizon=int(scen["horizon"]),
        leader_profile=tuple(tuple(k) for k in scen["leader_profile"]),
        controller_mode=scen["controller_mode"],
        noise_amplitude=float(scen["noise_amplitude"]),
        mc_runs=int(scen["mc_runs"]),
        nu_fill=scen["nu_fill"],
        state_source=scen["state_source"],
        substeps=int(scen["substeps"]),
    )


def _summary_table(report) -> str:
    rows = [f"{'veh':>4} {'|u|_2':>12} {'ratio_u':>9} {'ratio_z':>9} {'peak|e|':>10}"]
    for i, (un, ru, rz, pe) in enumerate(zip(report.u_norm, report.ratio_u, report.ratio_z, report.peak_error)):
        fmt = lambda x: f"{x:9.6f}" if x is not None else f"{'-':>9}"  # noqa: E731
        rows.append(f"{i:>4} {un:12.6f} {fmt(ru)} {fmt(rz)} {pe:10.6f}")
    return "\n".join(rows)


def simulate_from_bundle(scen: dict, bundle: dict, out_dir):
    if bundle.get("design_digest") != design_digest(scen):
        raise CliError("gains bundle was synthesized for a different scenario; rerun synthesize", EXIT_DIGEST)
    gains = GainSet.from_dict(bundle["gains"])
    observer = ObserverGains.from_dict(bundle["observer"])
    config = _sim_config(scen, gains, observer)
    out = Path(out_dir)
    run = run_scenario(config)
    write_run(run, out)
    report = l2_ratios(run, weights=tuple(scen["weights"]))
    (out / "report.json").write_text(report.to_json() + "\n")
    dump_json({"scenario": scen, "config_digest": config.digest(), "design_digest": bundle["design_digest"]}, out / "scenario.json")
    if scen["predicted_inputs"]:
        params = config.params
        lifted = lift(discretize(params, tuple(scen["weights"])), params.d)
        nominal = NominalGains(Fbar=gains.Fbar, Lbar=gains.Lbar, gamma=bundle["gamma_star"])
        pred = np.zeros_like(run.u)
        for i in range(1, run.u.shape[1]):
            pred[:, i] = predict_inputs(nominal, lifted, run.u[:, i - 1])
        write_series_csv(out / "u_predicted.csv", run.time, pred)
    if config.mc_runs > 1:
        dump_json(summary_dict(run_monte_carlo(config)), out / "summary.json")
    print(_summary_table(report))
    return report


def _load_dir(path) -> tuple[dict, dict | None]:
    d = Path(path)
    try:
        report = json.loads((d / "report.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"{d} has no readable report.json: {exc}") from exc
    summary = None
    if (d / "summary.json").exists():
        summary = json.loads((d / "summary.json").read_text())
    return report, summary


def _winner(delta: float | None) -> str:
    if delta is None:
        return "n/a"
    return "tie" if delta == 0 else ("b" if delta < 0 else "a")


def compare_dirs(a, b) -> dict:
    """Deltas are ``b - a``; for every metric lower is better."""
    ra, sa = _load_dir(a)
    rb, sb = _load_dir(b)
    if len(ra["u_norm"]) != len(rb["u_norm"]):
        raise ConfigurationError(f"vehicle counts differ: {len(ra['u_norm'])} vs {len(rb['u_norm'])}")
    sub = lambda x, y: None if x is None or y is None else y - x  # noqa: E731
    ratio_delta = [sub(x, y) for x, y in zip(ra["ratio_u"], rb["ratio_u"])]
    max_ratio_delta = sub(ra["max_ratio"], rb["max_ratio"])
    result = {
        "ratio_u_delta": ratio_delta,
        "max_ratio_delta": max_ratio_delta,
        "variance_delta": None,
        "mean_variance_delta": None,
        "winner": {"max_ratio": _winner(max_ratio_delta), "variance": "n/a"},
    }
    if sa is not None and sb is not None:
        va, vb = np.asarray(sa["u_var"]), np.asarray(sb["u_var"])
        if va.shape != vb.shape:
            raise ConfigurationError(f"ensemble shapes differ: {va.shape} vs {vb.shape}")
        per_vehicle = (vb.mean(axis=0) - va.mean(axis=0)).tolist()
        mean_delta = float(vb[:, 1:].mean() - va[:, 1:].mean())
        result["variance_delta"] = per_vehicle
        result["mean_variance_delta"] = mean_delta
        result["winner"]["variance"] = _winner(mean_delta)
    return result


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lossycacc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        p.add_argument("--scenario", help="scenario JSON file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="named scenario (file keys override it)")

    p = sub.add_parser("synthesize", help="design gains and write a gains bundle")
    scenario_args(p)
    p.add_argument("--out", help="output directory (default: scenario output_dir)")

    p = sub.add_parser("simulate", help="run a scenario with a gains bundle")
    scenario_args(p)
    p.add_argument("--gains", required=True, help="gains bundle written by synthesize")
    p.add_argument("--out", help="output directory (default: scenario output_dir)")

    p = sub.add_parser("compare", help="compare two simulate output directories")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", help="write the comparison JSON here instead of stdout")

    sub.add_parser("presets", help="list the named scenarios")
    return parser


def _out_dir(args, scen) -> Path:
    out = args.out or scen.get("output_dir")
    if not out:
        raise ConfigurationError("no output directory: pass --out or set output_dir")
    return Path(out)


def _scenario(args) -> dict:
    if args.scenario is None and args.preset is None:
        raise ConfigurationError("pass --scenario and/or --preset")
    return load_scenario(args.scenario, args.preset)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "presets":
            for name in sorted(PRESETS):
                print(name)
        elif args.command == "synthesize":
            scen = _scenario(args)
            out = _out_dir(args, scen)
            path = write_bundle(synthesize_bundle(scen), out)
            print(path)
        elif args.command == "simulate":
            scen = _scenario(args)
            out = _out_dir(args, scen)
            try:
                bundle = json.loads(Path(args.gains).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigurationError(f"cannot read gains bundle {args.gains}: {exc}") from exc
            report = simulate_from_bundle(scen, bundle, out)
            print(report.verdict_line())
        elif args.command == "compare":
            text = json.dumps(compare_dirs(args.a, args.b), indent=2, sort_keys=True)
            if args.out:
                Path(args.out).write_text(text + "\n")
            else:
                print(text)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (SynthesisError, PreconditionError) as exc:
        print(f"synthesis infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigurationError, ValueError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
