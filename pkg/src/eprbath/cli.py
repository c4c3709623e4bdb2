"""Scenario runner: named experiments, config parsing, sweeps, CSV output.

Configuration dialect (version 1): plain text, one ``key = value`` per line,
``#`` starts a comment, values parsed as JSON where possible (numbers, lists,
booleans) and as bare strings otherwise.  Command-line ``--set key=value``
overrides config-file entries.  Unknown keys are rejected.

Every run writes ``<scenario>.csv`` (UTF-8, header row, '.' decimal
separator, 17 significant digits) and ``manifest.json`` echoing the fully
resolved configuration; identical (config, seed) pairs produce byte-identical
files.  A config key ``sweep_key``/``sweep_values`` turns the run into a
sweep: one scenario execution per axis value (parallel up to ``--jobs``),
aggregated in axis order with the axis as the leading column.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .errors import ConfigError, EprBathError
from .gaussian import SqueezeParams
from .dynamics import (
    DynamicsParams, coupling_kappa, evolve_conditional, evolve_unconditional,
    evolve_with_detuning, steady_state_xi, steady_state_xi_cond,
)

CONFIG_VERSION = 1

SCENARIOS = {}


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _scenario(name, defaults, columns):
    def wrap(fn):
        SCENARIOS[name] = {"defaults": defaults, "columns": columns, "run": fn}
        return fn
    return wrap


# ---------------------------------------------------------------------------
# scenario implementations: each returns a list of rows (dicts)
# ---------------------------------------------------------------------------

@_scenario(
    "ideal_steady_state",
    {"Z": 2.5, "gamma_s": 1.0, "t_max": 12.0, "n_points": 241},
    ["t_ms", "xi_unconditional", "xi_conditional"],
)
def _run_ideal_steady_state(cfg, seed):
    params = DynamicsParams(gamma_s=cfg["gamma_s"], T=1.0,
                            squeeze=SqueezeParams.from_Z(cfg["Z"]))
    t = np.linspace(0.0, cfg["t_max"], int(cfg["n_points"]))
    unc = evolve_unconditional(params, 0.5, t)
    cond = evolve_conditional(params, 0.5, t)
    return [{"t_ms": ti, "xi_unconditional": xu, "xi_conditional": xc}
            for ti, xu, xc in zip(t, unc.xi_ode, cond.xi_ode)]


@_scenario(
    "noisy_conditional",
    {"Z": 2.5, "gamma_s": 1.0, "ratio_max": 2.0, "n_points": 41},
    ["gamma_extra_over_gamma_s", "xi_unconditional", "xi_conditional"],
)
def _run_noisy_conditional(cfg, seed):
    rows = []
    for ratio in np.linspace(0.0, cfg["ratio_max"], int(cfg["n_points"])):
        params = DynamicsParams(
            gamma_s=cfg["gamma_s"], gamma_extra=ratio * cfg["gamma_s"],
            T=1.0, squeeze=SqueezeParams.from_Z(cfg["Z"]))
        rows.append({
            "gamma_extra_over_gamma_s": float(ratio),
            "xi_unconditional": steady_state_xi(params),
            "xi_conditional": steady_state_xi_cond(params),
        })
    return rows


@_scenario(
    "detuning_sweep",
    {"Z": 2.5, "gamma_s": 1.0, "gamma_extra": 0.1,
     "delta_omegas": [0.0, 2.0, 4.0], "t_max": 8.0, "n_points": 161},
    ["delta_omega", "t_ms", "xi"],
)
def _run_detuning_sweep(cfg, seed):
    t = np.linspace(0.0, cfg["t_max"], int(cfg["n_points"]))
    rows = []
    for dom in cfg["delta_omegas"]:
        params = DynamicsParams(
            gamma_s=cfg["gamma_s"], gamma_extra=cfg["gamma_extra"], T=1.0,
            squeeze=SqueezeParams.from_Z(cfg["Z"]), delta_Omega=float(dom))
        traj = evolve_with_detuning(params, t)
        rows += [{"delta_omega": float(dom), "t_ms": ti, "xi": xi}
                 for ti, xi in zip(t, traj.xi)]
    return rows


@_scenario(
    "multilevel_fig3b",
    {"Gamma": 0.002, "Gamma_tilde": 0.193, "Gamma_col": 0.002,
     "Gamma_pump": 0.160, "Gamma_repump": 0.160, "Gamma_L_out": 0.002,
     "Z": 2.5, "N": 1.0, "d_values": [55.0, 100.0, 150.0],
     "t_max": 60.0, "n_points": 301},
    ["d", "t_ms", "xi2", "xi2_direct"],
)
def _run_multilevel(cfg, seed):
    from .rates import RateModelParams, xi2_adiabatic
    t = np.linspace(0.001, cfg["t_max"], int(cfg["n_points"]))
    rows = []
    for d in cfg["d_values"]:
        params = RateModelParams(
            Gamma=cfg["Gamma"], Gamma_tilde=cfg["Gamma_tilde"],
            Gamma_col=cfg["Gamma_col"], Gamma_pump=cfg["Gamma_pump"],
            Gamma_repump=cfg["Gamma_repump"], Gamma_L_out=cfg["Gamma_L_out"],
            d=float(d), N=cfg["N"], squeeze=SqueezeParams.from_Z(cfg["Z"]))
        traj = xi2_adiabatic(params, t)
        rows += [{"d": float(d), "t_ms": ti, "xi2": xa, "xi2_direct": xd}
                 for ti, xa, xd in zip(t, traj.xi2, traj.xi2_direct)]
    return rows


@_scenario(
    "reconstruction_roundtrip",
    {"Z": 2.5, "gamma_s": 1.0, "gamma_extra": 1.0, "T": 1.0, "eta": 0.84,
     "var_in": 0.5, "n_traj": 10000, "n_steps": 600},
    ["method", "with_decay", "eta", "var_true", "var_reconstructed",
     "abs_error", "n_traj"],
)
def _run_reconstruction_roundtrip(cfg, seed):
    import numpy as np
    from .gaussian import (
        ATOMIC_C, ATOMIC_S, LIGHT_C, LIGHT_S, GaussianState,
        beam_splitter_loss, new_vacuum,
    )
    from .dynamics import step_io, step_io_noisy
    from .reconstruction import (
        ModeFunction, ReconstructionInput, project_ensemble,
        reconstruct_variance, simulate_records,
    )
    sq = SqueezeParams.from_Z(cfg["Z"])
    rows = []

    def noiseless(with_decay, eta):
        params = DynamicsParams(
            gamma_s=cfg["gamma_s"],
            gamma_extra=cfg["gamma_extra"] if with_decay else 0.0,
            T=cfg["T"], squeeze=sq)
        st = new_vacuum(4, (ATOMIC_C, ATOMIC_S, LIGHT_C, LIGHT_S))
        cov = np.array(st.cov)
        cov[1, 1] = cov[3, 3] = cfg["var_in"]
        cov[0, 0] = cov[2, 2] = max(cfg["var_in"], 0.25 / cfg["var_in"])
        st = GaussianState(st.modes, cov, st.disp)
        out = (step_io_noisy if with_decay else step_io)(params, st)
        if eta < 1.0:
            out = beam_splitter_loss(out, LIGHT_C, eta)
        der = coupling_kappa(params)
        inp = ReconstructionInput(
            var_y_out=out.variance(LIGHT_C, "X"), kappa=der.kappa, Z=sq.Z,
            eta=eta, T2=1.0 / der.gamma_total, T=cfg["T"])
        rec = reconstruct_variance(inp, with_decay=with_decay)
        return {"method": "noiseless", "with_decay": int(with_decay),
                "eta": eta, "var_true": cfg["var_in"],
                "var_reconstructed": rec,
                "abs_error": abs(rec - cfg["var_in"]), "n_traj": 0}

    rows.append(noiseless(False, 1.0))
    rows.append(noiseless(True, 1.0))
    rows.append(noiseless(True, cfg["eta"]))

    # Monte Carlo round trip: CSS input (var 1/2) through seeded records
    params = DynamicsParams(gamma_s=cfg["gamma_s"],
                            gamma_extra=cfg["gamma_extra"], T=cfg["T"],
                            squeeze=sq, eta=cfg["eta"])
    recs = simulate_records(params, int(cfg["n_steps"]), int(cfg["n_traj"]),
                            seed)
    der = coupling_kappa(params)
    falling = ModeFunction("falling", der.gamma_total, cfg["T"], "cos")
    y = project_ensemble(recs, falling)
    inp = ReconstructionInput(var_y_out=float(np.var(y)), kappa=der.kappa,
                              Z=sq.Z, eta=cfg["eta"],
                              T2=1.0 / der.gamma_total, T=cfg["T"])
    rec = reconstruct_variance(inp, with_decay=True)
    rows.append({"method": "monte_carlo", "with_decay": 1, "eta": cfg["eta"],
                 "var_true": 0.5, "var_reconstructed": rec,
                 "abs_error": abs(rec - 0.5), "n_traj": int(cfg["n_traj"])})
    return rows


@_scenario(
    "kappa_calibration",
    {"Z": 2.5, "gamma_s": 1.0, "gamma_extra": 0.5, "T": 0.3,
     "displacement": 1.0, "n_traj": 10000, "n_steps": 200},
    ["method", "kappa2_true", "kappa2_estimated", "rel_error"],
)
def _run_kappa_calibration(cfg, seed):
    from .reconstruction import run_kappa_calibration
    params = DynamicsParams(gamma_s=cfg["gamma_s"],
                            gamma_extra=cfg["gamma_extra"], T=cfg["T"],
                            squeeze=SqueezeParams.from_Z(cfg["Z"]))
    rows = []
    for n_traj in (0, int(cfg["n_traj"])):
        res = run_kappa_calibration(params, cfg["displacement"],
                                    n_traj=n_traj,
                                    n_steps=int(cfg["n_steps"]), seed=seed)
        rows.append({"method": res.method, "kappa2_true": res.kappa2_expected,
                     "kappa2_estimated": res.kappa2,
                     "rel_error": abs(res.kappa2 / res.kappa2_expected - 1.0)})
    return rows


@_scenario(
    "oracle_convergence",
    {"Z": 1.5, "n_values": [4, 8, 16], "d": 4.0, "Gamma": 1.0},
    ["n_atoms", "xi_pn_steady", "xi_target", "abs_error"],
)
def _run_oracle_convergence(cfg, seed):
    from .lindblad import LindbladSystem, steady_state, witness_xi_pn
    sq = SqueezeParams.from_Z(cfg["Z"])
    target = sq.Zinv**2
    rows = []
    for n in cfg["n_values"]:
        system = LindbladSystem("dicke", int(n), d=cfg["d"],
                                Gamma=cfg["Gamma"], squeeze=sq)
        rho = steady_state(system, include_noise=False)
        xi = witness_xi_pn(rho)
        rows.append({"n_atoms": int(n), "xi_pn_steady": xi,
                     "xi_target": target, "abs_error": abs(xi - target)})
    return rows


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

@dataclass
class ScenarioConfig:
    scenario: str
    params: dict
    seed: int = 0
    output_dir: Path = field(default_factory=lambda: Path("."))
    sweep_key: str | None = None
    sweep_values: list | None = None
    jobs: int = 1


def _parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config_file(path: Path) -> dict:
    """Parse the key = value dialect; raises ConfigError with line numbers."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                              f"got {raw.strip()!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = _parse_value(value)
    return out


def resolve_config(scenario: str, raw: dict) -> tuple[dict, str | None, list | None]:
    """Apply defaults, reject unknown keys, split off the sweep axis."""
    if scenario not in SCENARIOS:
        raise ConfigError(
            f"unknown scenario {scenario!r}; available: "
            + ", ".join(sorted(SCENARIOS)))
    defaults = SCENARIOS[scenario]["defaults"]
    sweep_key = raw.pop("sweep_key", None)
    sweep_values = raw.pop("sweep_values", None)
    if (sweep_key is None) != (sweep_values is None):
        raise ConfigError("sweep_key and sweep_values must be given together")
    unknown = set(raw) - set(defaults)
    if unknown:
        raise ConfigError(
            f"unknown config keys for scenario {scenario!r}: "
            + ", ".join(sorted(str(k) for k in unknown)))
    cfg = {**defaults, **raw}
    if sweep_key is not None:
        if sweep_key not in defaults:
            raise ConfigError(f"sweep_key {sweep_key!r} is not a parameter "
                              f"of scenario {scenario!r}")
        if not isinstance(sweep_values, list) or not sweep_values:
            raise ConfigError("sweep_values must be a non-empty list")
        if len(set(map(str, sweep_values))) != len(sweep_values):
            raise ConfigError("sweep_values must be distinct")
        for v in sweep_values:
            if isinstance(v, float) and not math.isfinite(v):
                raise ConfigError("sweep_values must be finite")
    return cfg, sweep_key, sweep_values


def _write_csv(path: Path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")


def _write_manifest(path: Path, cfg: ScenarioConfig, resolved: dict,
                    columns, n_rows: int):
    manifest = {
        "config_version": CONFIG_VERSION,
        "package_version": __version__,
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "kernel_backend": _kernels.BACKEND,
        "parameters": resolved,
        "sweep_key": cfg.sweep_key,
        "sweep_values": cfg.sweep_values,
        "columns": list(columns),
        "n_rows": n_rows,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def run_scenario(cfg: ScenarioConfig) -> dict:
    """Run one scenario (or its sweep) and write CSV + manifest.

    Output files are only created after the whole computation succeeds, so a
    failing run leaves no partial artifacts.
    """
    resolved, sweep_key, sweep_values = resolve_config(
        cfg.scenario, dict(cfg.params))
    cfg.sweep_key, cfg.sweep_values = sweep_key, sweep_values
    spec = SCENARIOS[cfg.scenario]
    if sweep_key is None:
        rows = spec["run"](resolved, cfg.seed)
        columns = spec["columns"]
    else:
        rows, columns = sweep(cfg, resolved, sweep_key, sweep_values)

    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{cfg.scenario}.csv"
    manifest_path = outdir / "manifest.json"
    _write_csv(csv_path, columns, rows)
    _write_manifest(manifest_path, cfg, resolved, columns, len(rows))
    return {"csv": csv_path, "manifest": manifest_path, "n_rows": len(rows)}


def _sweep_point(args):
    scenario, resolved, key, value, seed = args
    point = {**resolved, key: value}
    return SCENARIOS[scenario]["run"](point, seed)


def sweep(cfg: ScenarioConfig, resolved: dict, key: str, values: list):
    """One scenario execution per axis value, aggregated in axis order.

    Points run concurrently up to ``cfg.jobs``; per-point seeds are derived
    deterministically from the root seed, so the output is independent of
    scheduling.
    """
    point_seeds = [int(s.generate_state(1)[0] % 2**31)
                   for s in np.random.SeedSequence(cfg.seed).spawn(len(values))]
    tasks = [(cfg.scenario, resolved, key, v, s)
             for v, s in zip(values, point_seeds)]
    if cfg.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]

    base_columns = SCENARIOS[cfg.scenario]["columns"]
    columns = base_columns if key in base_columns else [key, *base_columns]
    rows = []
    for value, point_rows in zip(values, results):
        for row in point_rows:
            if key not in row:
                row = {key: value, **row}
            rows.append(row)
    return rows, columns


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="eprbath",
        description="Scenario runner for the two-ensemble entanglement simulator")
    parser.add_argument("--scenario", required=True,
                        choices=sorted(SCENARIOS), help="named experiment")
    parser.add_argument("--config", type=Path, default=None,
                        help="key = value config file")
    parser.add_argument("--set", dest="overrides", action="append",
                        default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1,
                        help="max concurrent sweep points")
    parser.add_argument("--output-dir", type=Path, default=Path("."))
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        raw = parse_config_file(args.config) if args.config else {}
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, _, value = item.partition("=")
            raw[key.strip()] = _parse_value(value)
        cfg = ScenarioConfig(scenario=args.scenario, params=raw,
                             seed=args.seed, output_dir=args.output_dir,
                             jobs=max(1, args.jobs))
        result = run_scenario(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (EprBathError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {result['csv']} ({result['n_rows']} rows) and "
          f"{result['manifest']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
