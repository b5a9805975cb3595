"""Command-line driver: relaxation runs, diagram sweeps, closed-form queries.

Subcommands:
    relax   integrate one mixture to equilibrium, optionally writing the
            trajectory as CSV (and a figure with --plot);
    sweep   produce a fundamental-diagram dataset as CSV (and a figure);
    oracle  print the closed-form critical occupancy, road capacity and
            free-phase equilibrium.

Every output file carries its run manifest: the data-determining parameters
are embedded as '#' header comments in the CSV and the full record (tool
version, duration, output paths) goes to a .manifest.json sidecar.  Feeding
a sidecar back via --manifest reproduces the CSV byte for byte.

Exit codes: 0 success, 2 validation error, 3 non-convergence, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    ModelParams,
    NumericsParams,
    SpeedLattice,
    admissible,
    load_config_file,
    model_from_dict,
    model_to_dict,
    numerics_from_dict,
    numerics_to_dict,
    occupancy,
    single_population_params,
    table1_params,
)
from .diagrams import SWEEP_MODES, SweepSpec, run_sweep
from .integrator import NumericalFailureError, relax_to_equilibrium
from .kinetics import MixtureState, moments
from .oracle import critical_space, free_phase_equilibrium, max_flux

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3
EXIT_NUMERICAL = 4

CSV_COLUMNS = ("s", "rho_c", "rho_t", "rho_total", "q_c", "q_t", "q_total",
               "u_c", "u_t", "u_total", "converged", "residual", "t_final",
               "sample_id", "combo_label")


def _fmt(value) -> str:
    """Serialize one CSV field; floats carry 17 significant digits."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.17g}"


def _compact_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _manifest_comments(repro: dict) -> list[str]:
    lines = [f"trafficmix {__version__}", f"subcommand={repro['subcommand']}"]
    for key in ("model", "numerics", "params"):
        lines.append(f"{key}={_compact_json(repro[key])}")
    return lines


def _write_manifest_sidecar(out_path: Path, repro: dict, extras: dict) -> Path:
    sidecar = out_path.with_suffix(".manifest.json")
    record = dict(repro)
    record.update(extras)
    record["tool"] = "trafficmix"
    record["version"] = __version__
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar


def _write_points_csv(path: Path, points, repro: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in _manifest_comments(repro):
            fh.write(f"# {line}\n")
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for p in points:
            fh.write(",".join(_fmt(getattr(p, col)) for col in CSV_COLUMNS) + "\n")


def _load_manifest(path: str, subcommand: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    if manifest.get("subcommand") != subcommand:
        raise ConfigError(
            f"manifest {path} records subcommand {manifest.get('subcommand')!r}, "
            f"not {subcommand!r}")
    return manifest


def _pick(*values):
    for v in values:
        if v is not None:
            return v
    return None


def _resolve_inputs(args, subcommand: str):
    """Model + numerics from (CLI flags > manifest > config file > defaults)."""
    manifest = _load_manifest(args.manifest, subcommand) if args.manifest else None
    config_model = config_numerics = None
    if args.config:
        if manifest is not None:
            raise ConfigError("give either --config or --manifest, not both")
        config_model, config_numerics = load_config_file(args.config)

    if manifest is not None:
        params = model_from_dict(manifest["model"])
    elif config_model is not None:
        params = config_model
    elif getattr(args, "single", False):
        params = single_population_params(
            n=_pick(args.n, 2),
            v_max=_pick(args.v_max, 100.0),
            length=_pick(getattr(args, "length", None), 1.0),
        )
    else:
        params = table1_params(
            n_car=_pick(getattr(args, "nc", None), 3),
            n_truck=_pick(getattr(args, "nt", None), 2),
            v_max=_pick(args.v_max, 100.0),
        )

    # Scalar model overrides apply on top of whatever source won.
    if args.alpha is not None or args.gamma is not None or args.eta is not None:
        params = replace(
            params,
            alpha=_pick(args.alpha, params.alpha),
            gamma=_pick(args.gamma, params.gamma),
            eta=_pick(args.eta, params.eta),
        )
    if (manifest is not None or config_model is not None) and \
            (getattr(args, "nc", None) or getattr(args, "nt", None)):
        params = _rebuild_lattices(params, getattr(args, "nc", None),
                                   getattr(args, "nt", None), args.v_max)

    num = numerics_to_dict(numerics_from_dict({}))
    if config_numerics is not None:
        num.update(numerics_to_dict(config_numerics))
    if manifest is not None:
        num.update(manifest["numerics"])
    for flag, key in (("dt", "dt"), ("tol", "tol"), ("t_max", "t_max"),
                      ("seed", "seed"), ("s_steps", "s_steps"),
                      ("samples", "samples_per_s")):
        value = getattr(args, flag, None)
        if value is not None:
            num[key] = value
    numerics = numerics_from_dict(num)
    return params, numerics, manifest


def _rebuild_lattices(params: ModelParams, nc, nt, v_max) -> ModelParams:
    base_vmax = _pick(v_max, params.populations[0].lattice.v_max)
    n_car = _pick(nc, params.populations[0].lattice.n)
    car_lattice = SpeedLattice.equispaced(n_car, base_vmax)
    pops = [replace(params.populations[0], lattice=car_lattice)]
    if len(params.populations) == 2:
        n_truck = _pick(nt, min(params.populations[1].lattice.n, n_car))
        pops.append(replace(params.populations[1], lattice=car_lattice.prefix(n_truck)))
    return replace(params, populations=tuple(pops))


def _manifest_param(manifest, key, fallback=None):
    if manifest is None:
        return fallback
    return manifest.get("params", {}).get(key, fallback)


# ---------------------------------------------------------------------------
# relax

def cmd_relax(args) -> int:
    params, numerics, manifest = _resolve_inputs(args, "relax")

    rho_c = _pick(args.rho_c, _manifest_param(manifest, "rho_c"))
    if rho_c is None:
        raise ConfigError("relax: --rho-c is required")
    rho_t = _pick(args.rho_t, _manifest_param(manifest, "rho_t"), 0.0)
    naive = args.naive or bool(_manifest_param(manifest, "naive", False))
    perturb = _pick(args.perturb, _manifest_param(manifest, "perturb"), 0.0)
    traj_every = int(_pick(args.traj_every, _manifest_param(manifest, "traj_every"), 1))

    single = len(params.populations) == 1
    densities = (rho_c,) if single else (rho_c, rho_t)
    if any(rho < 0 for rho in densities):
        raise ConfigError(f"relax: densities must be nonnegative, got {densities}")
    if not admissible(densities, params.populations):
        s = occupancy(densities, params.populations)
        raise ConfigError(f"relax: mixture over-packs the road (s = {s:.6g} > 1)")
    if naive and not single:
        raise ConfigError("relax: --naive is a single-population demonstration (use --single)")

    sizes = [p.lattice.n for p in params.populations]
    initial = MixtureState.uniform([rho * (1.0 - perturb) for rho in densities], sizes)

    want_traj = bool(args.out or args.plot)
    result = relax_to_equilibrium(
        initial, params, numerics,
        formulation="naive" if naive else "well-balanced",
        trajectory_every=traj_every if want_traj else 0,
    )

    repro = {
        "subcommand": "relax",
        "model": model_to_dict(params),
        "numerics": numerics_to_dict(numerics),
        "params": {"rho_c": rho_c, "rho_t": rho_t, "naive": naive,
                   "perturb": perturb, "traj_every": traj_every},
    }

    if args.out:
        out = Path(args.out)
        _write_trajectory_csv(out, result.trajectory, params, repro)
        _write_manifest_sidecar(out, repro, {"out": str(out)})
        print(f"trajectory written to {out}")
    if args.plot:
        from .plots import plot_relaxation

        fig_path = Path(args.out).with_suffix(".png") if args.out else Path("relax.png")
        plot_relaxation(result.trajectory, params.lattices, fig_path,
                        title=f"relaxation ({'naive' if naive else 'well-balanced'})")
        print(f"figure written to {fig_path}")

    mom = moments(result.final_state, params.lattices)
    print(f"converged: {_fmt(result.converged)}")
    print(f"t_final: {_fmt(result.t_final)}  steps: {result.steps}")
    print(f"residual: {_fmt(result.residual)}")
    print(f"mass_drift: {' '.join(_fmt(d) for d in result.mass_drift)}")
    for i, pop in enumerate(params.populations):
        f = result.final_state.distributions[i]
        print(f"{pop.name}: rho={_fmt(mom.rho[i])} q={_fmt(mom.q[i])} u={_fmt(mom.u[i])}")
        print(f"f_{pop.name}: {' '.join(_fmt(v) for v in f)}")
    print(f"total: rho={_fmt(mom.rho_total)} q={_fmt(mom.q_total)} u={_fmt(mom.u_total)}")
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def _write_trajectory_csv(path: Path, trajectory, params: ModelParams, repro: dict) -> None:
    names = [p.name for p in params.populations]
    header = ["t"]
    for name, pop in zip(names, params.populations):
        header += [f"f_{name}_{j + 1}" for j in range(pop.lattice.n)]
    for name in names:
        header += [f"rho_{name}", f"q_{name}", f"u_{name}"]
    header += ["rho_total", "q_total", "u_total"]

    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in _manifest_comments(repro):
            fh.write(f"# {line}\n")
        fh.write(",".join(header) + "\n")
        for t, state in trajectory:
            mom = moments(state, params.lattices)
            row = [t]
            for f in state.distributions:
                row.extend(f)
            for i in range(len(names)):
                row += [mom.rho[i], mom.q[i], mom.u[i]]
            row += [mom.rho_total, mom.q_total, mom.u_total]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# sweep

def cmd_sweep(args) -> int:
    params, numerics, manifest = _resolve_inputs(args, "sweep")
    mode = _pick(args.mode, _manifest_param(manifest, "mode"))
    if mode is None:
        raise ConfigError("sweep: --mode is required")
    diagram = _pick(args.diagram, _manifest_param(manifest, "diagram"), "flux-density")
    out = _pick(args.out, None if manifest is None else manifest.get("out"))
    if out is None:
        raise ConfigError("sweep: --out is required")

    jobs = _pick(args.jobs, 1)
    spec = SweepSpec(mode=mode)
    started = time.monotonic()
    points = run_sweep(spec, params, numerics, jobs=jobs)
    duration = time.monotonic() - started

    repro = {
        "subcommand": "sweep",
        "model": model_to_dict(params),
        "numerics": numerics_to_dict(numerics),
        "params": {"mode": mode, "diagram": diagram},
    }
    out_path = Path(out)
    _write_points_csv(out_path, points, repro)
    _write_manifest_sidecar(out_path, repro, {
        "out": str(out_path), "jobs": jobs, "duration_s": duration,
    })
    n_conv = sum(p.converged for p in points)
    print(f"{len(points)} points ({n_conv} converged) written to {out_path}")

    if args.plot:
        from .plots import plot_diagram

        fig_path = out_path.with_suffix(".png")
        plot_diagram(points, diagram, fig_path, title=f"{mode} sweep")
        print(f"figure written to {fig_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle

def cmd_oracle(args) -> int:
    params, numerics, manifest = _resolve_inputs(args, "oracle")
    if params.alpha != 1.0:
        print(f"warning: closed forms assume alpha = 1 (model has alpha = {params.alpha})",
              file=sys.stderr)

    cars = params.populations[0]
    gamma = params.gamma
    s_c = critical_space(gamma)
    q_cap = max_flux(gamma, cars.lattice.v_max, cars.rho_max)
    print(f"gamma: {_fmt(gamma)}")
    print(f"critical_occupancy: {_fmt(s_c)}")
    print(f"max_flux: {_fmt(q_cap)}")

    rho_c = _pick(args.rho_c, _manifest_param(manifest, "rho_c"))
    rho_t = _pick(args.rho_t, _manifest_param(manifest, "rho_t"), 0.0)
    s_arg = _pick(args.s, _manifest_param(manifest, "s"))
    if rho_c is None and s_arg is None:
        return EXIT_OK

    if len(params.populations) != 2:
        raise ConfigError("oracle: equilibrium queries need a two-population model")
    if rho_c is None:
        rho_c = 0.0
    densities = (rho_c, rho_t)
    s = s_arg if s_arg is not None else occupancy(densities, params.populations)
    if not 0.0 <= s <= 1.0:
        raise ConfigError(f"oracle: occupancy s = {s:.6g} outside [0, 1]")
    r_value = s**gamma
    print(f"s: {_fmt(s)}  R: {_fmt(r_value)}")

    eq = free_phase_equilibrium(rho_c, rho_t, params.lattices, r_value)
    print(f"valid: {_fmt(eq.valid)}")
    if not eq.valid:
        print(f"warning: R = {r_value:.6g} > 1/2 lies in the congested phase; "
              "no closed form (use relax)", file=sys.stderr)
        return EXIT_OK

    print(f"f_{cars.name}: {' '.join(_fmt(v) for v in eq.f_car)}")
    print(f"f_{params.populations[1].name}: {' '.join(_fmt(v) for v in eq.f_truck)}")
    print(f"flux: {_fmt(eq.flux)}")

    if args.out:
        repro = {
            "subcommand": "oracle",
            "model": model_to_dict(params),
            "numerics": numerics_to_dict(numerics),
            "params": {"rho_c": rho_c, "rho_t": rho_t, "s": s_arg},
        }
        out = Path(args.out)
        with open(out, "w", encoding="utf-8", newline="") as fh:
            for line in _manifest_comments(repro):
                fh.write(f"# {line}\n")
            fh.write("population,class,speed,f\n")
            for name, lattice, dist in (
                (cars.name, cars.lattice, eq.f_car),
                (params.populations[1].name, params.populations[1].lattice, eq.f_truck),
            ):
                for j, (v, f) in enumerate(zip(lattice.speeds, dist)):
                    fh.write(f"{name},{j + 1},{_fmt(v)},{_fmt(f)}\n")
        _write_manifest_sidecar(out, repro, {"out": str(out)})
        print(f"equilibrium written to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _add_common(sub: argparse.ArgumentParser, with_sampling: bool) -> None:
    sub.add_argument("--config", help="JSON configuration file")
    sub.add_argument("--manifest", help="re-run from a .manifest.json sidecar")
    sub.add_argument("--out", help="output CSV path")
    sub.add_argument("--alpha", type=float, help="environment parameter in [0, 1]")
    sub.add_argument("--gamma", type=float, help="acceleration-law exponent")
    sub.add_argument("--eta", type=float, help="interaction rate [1/h]")
    sub.add_argument("--v-max", type=float, dest="v_max", help="top speed of the fast class [km/h]")
    sub.add_argument("--tol", type=float, help="equilibrium residual tolerance")
    sub.add_argument("--t-max", type=float, dest="t_max", help="maximum relaxation time [h]")
    sub.add_argument("--dt", type=float, help="fixed time step [h] (default: stability policy)")
    sub.add_argument("--seed", type=int, help="random-mixture seed")
    if with_sampling:
        sub.add_argument("--s-steps", type=int, dest="s_steps",
                         help="occupancy grid intervals on [0, 1]")
        sub.add_argument("--samples", type=int, help="mixtures per occupancy value")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trafficmix",
        description="kinetic two-population traffic equilibria and fundamental diagrams",
    )
    parser.add_argument("--version", action="version", version=f"trafficmix {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    relax = subs.add_parser("relax", help="integrate one mixture to equilibrium")
    relax.add_argument("--rho-c", type=float, dest="rho_c", help="car density [veh/km]")
    relax.add_argument("--rho-t", type=float, dest="rho_t", help="truck density [veh/km]")
    relax.add_argument("--single", action="store_true",
                       help="normalized single population (length 1 km, rho_max 1)")
    relax.add_argument("--n", type=int, help="speed classes of the single population")
    relax.add_argument("--length", type=float, help="vehicle length of the single population [km]")
    relax.add_argument("--nc", type=int, help="car speed classes")
    relax.add_argument("--nt", type=int, help="truck speed classes")
    relax.add_argument("--naive", action="store_true",
                       help="freeze the loss term at the nominal density (mass-losing demo)")
    relax.add_argument("--perturb", type=float,
                       help="relative initial-mass perturbation, e.g. 1e-6")
    relax.add_argument("--traj-every", type=int, dest="traj_every",
                       help="record every k-th step in the trajectory CSV (default 1)")
    relax.add_argument("--plot", action="store_true", help="render the trajectory figure")
    _add_common(relax, with_sampling=False)
    relax.set_defaults(func=cmd_relax)

    sweep = subs.add_parser("sweep", help="fundamental-diagram dataset")
    sweep.add_argument("--mode", choices=SWEEP_MODES, help="sweep mode")
    sweep.add_argument("--nc", type=int, help="car speed classes")
    sweep.add_argument("--nt", type=int, help="truck speed classes")
    sweep.add_argument("--jobs", type=int, help="parallel workers (default 1)")
    sweep.add_argument("--diagram", choices=("flux-density", "flux-space",
                                             "speed-density", "speed-space"),
                       help="figure kind for --plot (default flux-density)")
    sweep.add_argument("--plot", action="store_true", help="render the diagram figure")
    _add_common(sweep, with_sampling=True)
    sweep.set_defaults(func=cmd_sweep)

    oracle = subs.add_parser("oracle", help="closed-form free-phase results")
    oracle.add_argument("--rho-c", type=float, dest="rho_c", help="car density [veh/km]")
    oracle.add_argument("--rho-t", type=float, dest="rho_t", help="truck density [veh/km]")
    oracle.add_argument("--s", type=float, help="road occupancy (overrides the density-derived value)")
    oracle.add_argument("--nc", type=int, help="car speed classes")
    oracle.add_argument("--nt", type=int, help="truck speed classes")
    _add_common(oracle, with_sampling=False)
    oracle.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
