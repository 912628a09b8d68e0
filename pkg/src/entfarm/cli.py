"""Command-line driver: cycle runs, fixed points, sweeps, figure data.

Every subcommand reads an optional INI config (see entfarm.config), applies
environment and flag overrides, writes CSV files plus gnuplot scripts into
the output directory, and exits 0 on success, 2 on configuration problems,
3 on numerical failures.  Error lines are prefixed "error:" on stderr.
Outputs are deterministic: the same configuration produces bit-identical
files.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from entfarm import cavity, dynamics, fock, gaussian, protocol, spectral, thermo
from entfarm import config as config_mod
from entfarm.config import ConfigError, ExperimentConfig, SweepSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

NUMERICAL_ERRORS = (
    gaussian.InvalidStateError,
    gaussian.DecompositionError,
    dynamics.PropagatorAccuracyError,
    dynamics.StepTooLargeError,
    spectral.SpectralFailureError,
    spectral.NoUniqueFixedPointError,
    spectral.GrowthOverflowError,
    fock.TooLargeError,
    fock.CutoffTooSmallError,
    thermo.DivergentLogDensityError,
    thermo.NoThermalMatchError,
)


# ---------------------------------------------------------------------------
# output plumbing


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_text(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def _gnuplot(name: str, ylabel: str, plots: list[str], extra: str = "") -> str:
    lines = [
        f"# gnuplot script; run as: gnuplot {name}.gp",
        "set datafile separator ','",
        "set terminal pngcairo size 900,600",
        f"set output '{name}.png'",
        "set xlabel 'cycle'",
        f"set ylabel '{ylabel}'",
        "set key top right",
    ]
    if extra:
        lines.append(extra)
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def _initial_field(cfg: ExperimentConfig, cav: cavity.CavityConfig):
    if cfg.temperature == 0.0:
        return None
    freqs = cavity.mode_frequencies(cav)
    return gaussian.thermal_state(freqs, cfg.temperature)


def _load(args) -> ExperimentConfig:
    cfg = config_mod.load_config(getattr(args, "config", None))
    cfg = config_mod.apply_flag_overrides(cfg, args)
    gaussian.set_log_base(cfg.log_base_value)
    os.makedirs(cfg.directory, exist_ok=True)
    return cfg


def _out(cfg: ExperimentConfig, filename: str) -> str:
    return os.path.join(cfg.directory, filename)


# ---------------------------------------------------------------------------
# run-cycles


def _coupled_fixed_point(cav, sigma0):
    """Fixed point reduced to the coupled modes, or None when not computable.

    The decoupled modes sit at their initial state forever on both sides of
    the comparison, so they contribute nothing to the distance; dropping
    them also keeps the reference state mixed (a frozen vacuum mode would
    make its log-density divergent).
    """
    try:
        dead = set(cavity.decoupled_positions(cav))
        coupled = tuple(p for p in range(cav.n_field_modes) if p not in dead)
        res = spectral.fixed_point(
            protocol.blocks_for(cav),
            decoupled_positions=sorted(dead),
            initial_sigma=sigma0,
        )
        star = gaussian.reduce_modes(res.sigma_star, coupled)
        gaussian.assert_physical(star)
        thermo.log_density(star)
        return star, coupled
    except NUMERICAL_ERRORS + (ValueError,):
        return None, None


def cmd_run_cycles(args) -> int:
    cfg = _load(args)
    cav = cfg.cavity_config()
    sigma0 = _initial_field(cfg, cav)
    star, coupled = _coupled_fixed_point(cav, sigma0)
    rel_entropy: dict[int, float] = {}
    observer = None
    if star is not None:

        def observer(k, sigma_f, _star=star, _coupled=coupled):
            reduced = gaussian.reduce_modes(sigma_f, _coupled)
            rel_entropy[k] = thermo.relative_entropy(reduced, _star)

    traj = protocol.run_cycles(
        cav,
        sigma_f0=sigma0,
        n_cycles=cfg.n_cycles,
        snapshot_stride=cfg.stride,
        field_observer=observer,
    )
    rows = [
        (
            r.cycle,
            r.log_negativity,
            r.energy_input,
            r.field_purity,
            r.field_thermality,
            rel_entropy.get(r.cycle),
        )
        for r in traj.records
    ]
    _write_csv(
        _out(cfg, "trajectory.csv"),
        (
            "cycle",
            "log_negativity",
            "energy_input",
            "field_purity",
            "thermality",
            "relative_entropy_to_fixed_point",
        ),
        rows,
    )
    _write_text(
        _out(cfg, "trajectory.gp"),
        _gnuplot(
            "trajectory",
            "log-negativity",
            ["'trajectory.csv' skip 1 using 1:2 with lines title 'per-cycle E_N'"],
        ),
    )
    print(f"wrote {_out(cfg, 'trajectory.csv')} ({len(rows)} cycles)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fixed-point


def cmd_fixed_point(args) -> int:
    cfg = _load(args)
    cav = cfg.cavity_config()
    sigma0 = _initial_field(cfg, cav)
    res = spectral.fixed_point(
        protocol.blocks_for(cav),
        decoupled_positions=cavity.decoupled_positions(cav),
        initial_sigma=sigma0,
    )
    prop = dynamics.propagator_for(cav)
    sigma_d, _, _ = protocol.full_cycle(res.sigma_star, gaussian.vacuum_state(2), prop)
    neg = gaussian.log_negativity(sigma_d)
    freqs = cavity.mode_frequencies(cav)
    try:
        purity = gaussian.purity(res.sigma_star)
        thermality = thermo.thermality_estimator(res.sigma_star, freqs)
    except NUMERICAL_ERRORS + (ValueError,):
        purity = math.nan
        thermality = math.nan
    _write_csv(
        _out(cfg, "fixed_point.csv"),
        ("method", "coupled_dim", "residual", "log_negativity", "field_purity", "thermality"),
        [(res.method, res.coupled_dim, res.residual, neg, purity, thermality)],
    )
    _write_csv(
        _out(cfg, "fixed_point_sigma.csv"),
        [f"c{j}" for j in range(res.sigma_star.shape[1])],
        [tuple(row) for row in res.sigma_star],
    )
    print(
        f"fixed point via {res.method}: residual {res.residual:.3e}, "
        f"fresh-cycle log-negativity {neg:.6e}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# spectrum


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    cav = cfg.cavity_config()
    blocks = protocol.blocks_for(cav)
    dead = cavity.decoupled_positions(cav)
    rows = []
    for label, positions in (("full", ()), ("coupled", dead)):
        spec = spectral.field_spectrum(blocks, exclude_positions=positions)
        for idx, ev in enumerate(spec.eigenvalues):
            rows.append((label, idx, ev.real, ev.imag, abs(ev)))
        if label == "coupled":
            conv, inst = spectral.timescales(spec)
            print(f"coupled max modulus: {spec.max_modulus!r}")
            print(f"convergence cycles: {'-' if conv is None else repr(conv)}")
            print(f"instability cycles: {'-' if inst is None else repr(inst)}")
    _write_csv(
        _out(cfg, "spectrum.csv"),
        ("subspace", "index", "real", "imag", "modulus"),
        rows,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _sweep_point(cfg: ExperimentConfig, spec: SweepSpec, value: float):
    try:
        cav = spec.apply(cfg, value).cavity_config()
        blocks = protocol.blocks_for(cav)
        dead = cavity.decoupled_positions(cav)
        spectrum = spectral.field_spectrum(blocks, exclude_positions=dead)
        _, instability = spectral.timescales(spectrum)
        log_critical = None if instability is None else math.log10(instability)
        return (value, spectrum.max_modulus, log_critical, "")
    except NUMERICAL_ERRORS + (ValueError,) as exc:
        return (value, None, None, f"{type(exc).__name__}: {exc}")


def cmd_sweep(args) -> int:
    cfg = _load(args)
    spec = SweepSpec(args.param, args.min, args.max, args.points, args.scale)
    grid = spec.grid()
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        rows = list(pool.map(lambda v: _sweep_point(cfg, spec, float(v)), grid))
    rows.sort(key=lambda row: row[0])
    _write_csv(
        _out(cfg, "sweep.csv"),
        ("parameter", "max_modulus", "log10_critical_cycles", "failure"),
        rows,
    )
    _write_text(
        _out(cfg, "sweep.gp"),
        _gnuplot(
            "sweep",
            "log10 critical cycles",
            ["'sweep.csv' skip 1 using 1:3 with linespoints title 'critical cycles'"],
            extra=f"set xlabel '{args.param}'",
        ),
    )
    failures = sum(1 for row in rows if row[3])
    print(f"wrote {_out(cfg, 'sweep.csv')} ({len(rows)} points, {failures} failures)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# short-cycle


def cmd_short_cycle(args) -> int:
    cfg = _load(args)
    base = cfg.cavity_config()
    r = abs(base.x2 - base.x1)
    cfg = replace(cfg, cycle_time=args.tf_r * r)
    if cfg.modes < 128:
        print(
            f"warning: modes={cfg.modes} is below the recommended floor of 128; "
            "short cycles excite high modes",
            file=sys.stderr,
        )
    cav = cfg.cavity_config()
    traj = protocol.run_cycles(
        cav,
        sigma_f0=_initial_field(cfg, cav),
        n_cycles=cfg.n_cycles,
        snapshot_stride=cfg.stride,
    )
    rows = [(rec.cycle, rec.log_negativity) for rec in traj.records]
    _write_csv(_out(cfg, "short_cycle.csv"), ("cycle", "log_negativity"), rows)
    _write_text(
        _out(cfg, "short_cycle.gp"),
        _gnuplot(
            "short_cycle",
            "log-negativity",
            ["'short_cycle.csv' skip 1 using 1:2 with lines title 'per-cycle E_N'"],
        ),
    )
    print(f"wrote {_out(cfg, 'short_cycle.csv')} (cycle time {cfg.cycle_time!r})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# reproduce-fig


FIGURES = (
    "lognegplot",
    "energyfig",
    "thermPure",
    "thermality",
    "ultralong",
    "eigcoupling",
    "eigtime",
    "extinction",
)


def _three_start_runs(cfg: ExperimentConfig, temperatures=(0.0, 0.5, 1.0)):
    runs = []
    for t in temperatures:
        cav = cfg.cavity_config()
        sigma0 = _initial_field(replace(cfg, temperature=t), cav)
        runs.append(
            protocol.run_cycles(
                cav, sigma_f0=sigma0, n_cycles=cfg.n_cycles, snapshot_stride=cfg.stride
            )
        )
    return runs


def _fig_lognegplot(cfg):
    runs = _three_start_runs(cfg)
    rows = [
        (k + 1,) + tuple(run.records[k].log_negativity for run in runs)
        for k in range(cfg.n_cycles)
    ]
    plots = [
        "'lognegplot.csv' skip 1 using 1:2 with lines title 'vacuum start'",
        "'lognegplot.csv' skip 1 using 1:3 with lines title 'T=0.5 start'",
        "'lognegplot.csv' skip 1 using 1:4 with lines title 'T=1 start'",
    ]
    return ("cycle", "en_vacuum", "en_t05", "en_t1"), rows, _gnuplot(
        "lognegplot", "log-negativity", plots
    )


def _fig_energyfig(cfg):
    runs = _three_start_runs(cfg)
    rows = [
        (k + 1,) + tuple(run.records[k].energy_input for run in runs)
        for k in range(cfg.n_cycles)
    ]
    plots = [
        "'energyfig.csv' skip 1 using 1:2 with lines title 'vacuum start'",
        "'energyfig.csv' skip 1 using 1:3 with lines title 'T=0.5 start'",
        "'energyfig.csv' skip 1 using 1:4 with lines title 'T=1 start'",
    ]
    return ("cycle", "energy_vacuum", "energy_t05", "energy_t1"), rows, _gnuplot(
        "energyfig", "energy cost per cycle", plots
    )


def _fig_thermpure(cfg):
    runs = _three_start_runs(cfg, temperatures=(0.0, 1.0))
    rows = [
        (k + 1,) + tuple(run.records[k].field_purity for run in runs)
        for k in range(cfg.n_cycles)
    ]
    plots = [
        "'thermPure.csv' skip 1 using 1:2 with lines title 'vacuum start'",
        "'thermPure.csv' skip 1 using 1:3 with lines title 'T=1 start'",
    ]
    return ("cycle", "purity_vacuum", "purity_t1"), rows, _gnuplot(
        "thermPure", "field purity", plots
    )


def _fig_thermality(cfg):
    # the vacuum curve starts after one cycle: the estimator is undefined on
    # the exactly pure initial state
    runs = _three_start_runs(cfg)
    rows = [
        (k + 1,) + tuple(run.records[k].field_thermality for run in runs)
        for k in range(cfg.n_cycles)
    ]
    plots = [
        "'thermality.csv' skip 1 using 1:2 with lines title 'vacuum start'",
        "'thermality.csv' skip 1 using 1:3 with lines title 'T=0.5 start'",
        "'thermality.csv' skip 1 using 1:4 with lines title 'T=1 start'",
    ]
    return ("cycle", "thermality_vacuum", "thermality_t05", "thermality_t1"), rows, _gnuplot(
        "thermality", "thermality estimator", plots
    )


def _fig_ultralong(cfg):
    cav = cfg.cavity_config()
    scan = spectral.extinction_scan(cav, sigma_f0=_initial_field(cfg, cav))
    rows = list(zip(scan.ks, scan.negativities))
    extra = "set logscale x 10"
    if scan.spectral_estimate is not None:
        extra += (
            f"\nset arrow from {scan.spectral_estimate!r}, graph 0 "
            f"to {scan.spectral_estimate!r}, graph 1 nohead dashtype 2"
        )
    plots = ["'ultralong.csv' skip 1 using 1:2 with linespoints title 'E_N at cycle k'"]
    return ("cycle", "log_negativity"), rows, _gnuplot(
        "ultralong", "log-negativity", plots, extra=extra
    )


def _sweep_rows(cfg, spec):
    return sorted(
        (_sweep_point(cfg, spec, float(v)) for v in spec.grid()), key=lambda r: r[0]
    )


def _fig_eigcoupling(cfg):
    spec = SweepSpec("lambda", 0.005, 0.04, 7, "log")
    rows = _sweep_rows(replace(cfg, cycle_time=21.0), spec)
    plots = [
        "'eigcoupling.csv' skip 1 using 1:3 with linespoints title 'critical cycles'"
    ]
    extra = "set xlabel 'coupling'\nset logscale x 10"
    return ("parameter", "max_modulus", "log10_critical_cycles", "failure"), rows, _gnuplot(
        "eigcoupling", "log10 critical cycles", plots, extra=extra
    )


def _fig_eigtime(cfg):
    spec = SweepSpec("t_f", 1.0, 33.0, 33, "linear")
    rows = _sweep_rows(cfg, spec)
    plots = ["'eigtime.csv' skip 1 using 1:3 with linespoints title 'critical cycles'"]
    extra = "set xlabel 'cycle time'"
    return ("parameter", "max_modulus", "log10_critical_cycles", "failure"), rows, _gnuplot(
        "eigtime", "log10 critical cycles", plots, extra=extra
    )


def _fig_extinction(cfg):
    base = cfg.cavity_config()
    r = abs(base.x2 - base.x1)
    columns = []
    for factor in (1.44, 1.48, 1.52):
        cav = replace(cfg, cycle_time=factor * r).cavity_config()
        traj = protocol.run_cycles(
            cav, sigma_f0=_initial_field(cfg, cav), n_cycles=cfg.n_cycles,
            snapshot_stride=cfg.stride,
        )
        columns.append([rec.log_negativity for rec in traj.records])
    rows = [
        (k + 1, columns[0][k], columns[1][k], columns[2][k]) for k in range(cfg.n_cycles)
    ]
    plots = [
        "'extinction.csv' skip 1 using 1:2 with lines title 't_f = 1.44 r'",
        "'extinction.csv' skip 1 using 1:3 with lines title 't_f = 1.48 r'",
        "'extinction.csv' skip 1 using 1:4 with lines title 't_f = 1.52 r'",
    ]
    return ("cycle", "en_144", "en_148", "en_152"), rows, _gnuplot(
        "extinction", "log-negativity", plots
    )


_FIG_BUILDERS = {
    "lognegplot": _fig_lognegplot,
    "energyfig": _fig_energyfig,
    "thermPure": _fig_thermpure,
    "thermality": _fig_thermality,
    "ultralong": _fig_ultralong,
    "eigcoupling": _fig_eigcoupling,
    "eigtime": _fig_eigtime,
    "extinction": _fig_extinction,
}


def cmd_reproduce_fig(args) -> int:
    if args.name not in _FIG_BUILDERS:
        print(
            f"error: unknown figure {args.name!r}; valid names: {', '.join(FIGURES)}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    cfg = _load(args)
    header, rows, script = _FIG_BUILDERS[args.name](cfg)
    _write_csv(_out(cfg, f"{args.name}.csv"), header, rows)
    _write_text(_out(cfg, f"{args.name}.gp"), script)
    print(f"wrote {_out(cfg, args.name + '.csv')} and {_out(cfg, args.name + '.gp')}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    cfg = _load(args)
    checks: list[tuple[str, bool, str]] = []

    def record(name, ok, detail):
        checks.append((name, ok, detail))
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")

    for n_modes, cutoff in ((1, 8), (2, 6)):
        cav = cavity.standard_config(
            n_modes,
            length=cfg.length,
            coupling=cfg.coupling,
            detector_frequency=cfg.detector_frequency,
            x1=cfg.x1,
            x2=cfg.x2,
            cycle_time=cfg.cycle_time,
        )
        sigma_g = dynamics.evolve(
            gaussian.vacuum_state(2 + n_modes), dynamics.propagator_for(cav)
        )
        sigma_f = fock.evolve_and_covariance(fock.FockConfig(cav, cutoff), cav.cycle_time)
        err = float(np.max(np.abs(sigma_f - sigma_g)))
        record(
            f"covariance agreement ({n_modes} field mode{'s' if n_modes > 1 else ''})",
            err < 1e-4,
            f"max entry difference {err:.3e} (tolerance 1e-4)",
        )
        if n_modes == 1:
            en_g = gaussian.log_negativity(gaussian.reduce_modes(sigma_g, (0, 1)))
            en_f = gaussian.log_negativity(gaussian.reduce_modes(sigma_f, (0, 1)))
            record(
                "detector negativity agreement",
                abs(en_f - en_g) < 1e-4,
                f"difference {abs(en_f - en_g):.3e} (tolerance 1e-4)",
            )
            nus = gaussian.symplectic_eigenvalues(sigma_f)
            record(
                "brute-force covariance physical",
                bool(np.all(nus >= 1.0 - 1e-6)),
                f"min symplectic eigenvalue {float(nus.min())!r}",
            )
    try:
        cav1 = cavity.standard_config(
            1,
            length=cfg.length,
            coupling=cfg.coupling,
            detector_frequency=cfg.detector_frequency,
            cycle_time=cfg.cycle_time,
        )
        fock.evolve_and_covariance(fock.FockConfig(cav1, 2), cav1.cycle_time)
        record("truncation leakage gate", False, "cutoff 2 was not rejected")
    except fock.CutoffTooSmallError:
        record("truncation leakage gate", True, "cutoff 2 rejected as expected")

    failed = [name for name, ok, _ in checks if not ok]
    if failed:
        print(f"error: {len(failed)} verification check(s) failed", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"all {len(checks)} verification checks passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", metavar="PATH", help="INI configuration file")
    shared.add_argument("--out", metavar="DIR", help="output directory")
    shared.add_argument(
        "--workers", type=int, default=4, metavar="N", help="parallel sweep workers"
    )
    shared.add_argument(
        "--log-base", choices=("e", "2"), dest="log_base",
        help="unit of entropy and negativity",
    )
    shared.add_argument(
        "--modes", type=int, metavar="M", help="number of lowest field modes to keep"
    )
    shared.add_argument(
        "--window", metavar="W",
        help="resonant window: 'default' for the five lowest modes, or a width",
    )

    parser = argparse.ArgumentParser(
        prog="entfarm",
        description="Repeated entanglement extraction from a cavity field",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-cycles", parents=[shared], help="simulate extraction cycles")
    p.set_defaults(func=cmd_run_cycles)

    p = sub.add_parser("fixed-point", parents=[shared], help="solve the field fixed point")
    p.set_defaults(func=cmd_fixed_point)

    p = sub.add_parser("spectrum", parents=[shared], help="spectrum of the cycle map")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("sweep", parents=[shared], help="sweep a parameter")
    p.add_argument("--param", required=True, choices=("lambda", "t_f", "temperature"))
    p.add_argument("--min", required=True, type=float)
    p.add_argument("--max", required=True, type=float)
    p.add_argument("--points", required=True, type=int)
    p.add_argument("--scale", default="linear", choices=("linear", "log"))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser(
        "short-cycle", parents=[shared], help="cycles near the light-crossing time"
    )
    p.add_argument(
        "--tf-r", required=True, type=float, dest="tf_r",
        help="cycle time as a multiple of the detector separation",
    )
    p.set_defaults(func=cmd_short_cycle)

    p = sub.add_parser("reproduce-fig", parents=[shared], help="emit figure data + script")
    p.add_argument("name", help=f"one of: {', '.join(FIGURES)}")
    p.set_defaults(func=cmd_reproduce_fig)

    p = sub.add_parser("verify", parents=[shared], help="brute-force validation suite")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
