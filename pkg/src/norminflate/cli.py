"""Experiment runner: JSON config, subcommand dispatch, CSV and SVG artifacts.

Every run resolves its configuration against the packaged JSON schema
(unknown keys rejected), writes the resolved document next to its
artifacts so the run can be reproduced byte-for-byte, and prints a
one-line summary per bound report.  Exit codes: 0 success, 1 usage or
configuration error, 2 frozen regression bound failure.
"""

from __future__ import annotations

import argparse
import functools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources

import jsonschema

from .fields import TGridSpec, besov_norm
from .lacunary import (
    LacunaryParams,
    make_frequencies,
    make_initial_data,
    params_from_rule,
    verify_construction,
)
from .picard import (
    bilinear,
    remainder_bound_M,
    remainder_bound_z,
    rho10_amplitude,
    rho10_coefficient,
    rho11_sup_bound,
    rho12_sup_bound,
    theta_sup_bound,
)
from .spectral import (
    SimConfig,
    SimulationError,
    residual_decompose,
    save_snapshot,
    simulate,
    validate_resolution,
)
from .picard import first_iterates
from .verify import (
    BoundReport,
    SweepResult,
    check_data_norms,
    check_lacunary_sums,
    check_rho1_bounds,
    inflation_experiment,
    operator_norm_probes,
    theorem_witness,
)

_EXIT_OK = 0
_EXIT_USAGE = 1
_EXIT_REGRESSION = 2

_COMMANDS = ("construct", "picard", "simulate", "besov", "sweep", "witness")

_SWEEP_COLUMNS = (
    "r",
    "beta",
    "nu",
    "delta",
    "K",
    "T",
    "s",
    "norm_u0_B1",
    "norm_rho0_B1",
    "rho10_besov",
    "correction_sum",
    "net_lower_bound",
    "slope_running",
)

_REPORT_COLUMNS = (
    "name",
    "r",
    "t",
    "lhs",
    "rhs_model",
    "implied_constant",
    "bound",
    "kind",
    "passed",
    "note",
)


class ConfigError(Exception):
    """Usage or configuration problem; maps to exit code 1."""


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run settings (mirrors the emitted resolved config)."""

    command: str
    params: LacunaryParams
    sim: SimConfig | None
    tgrid: TGridSpec
    output_dir: str
    deterministic: bool
    seed: int
    jobs: int
    plot: bool
    times: tuple[float, ...]
    sweep: dict
    witness: dict
    document: dict


# -- configuration plumbing -------------------------------------------------


@functools.lru_cache(maxsize=1)
def _schema() -> dict:
    text = resources.files("norminflate").joinpath("config.schema.json").read_text("utf-8")
    return json.loads(text)


def _defaults() -> dict:
    return {
        "params": {"r": 4, "beta": 0.45, "K": 4, "nu": 0.2, "delta": 0.01, "s": 0.5},
        "tgrid": {"n": 400, "t_min": 1e-8, "t_max": 4.0, "refine_rounds": 3},
        "times": [],
        "sweep": {"rs": [4, 8, 16, 32, 64], "checks": True, "trials": 0},
        "witness": {"epsilon": 0.9, "s": 0.5, "nu": 0.5, "delta": 0.01},
        "output_dir": os.environ.get("NORMINFLATE_OUTPUT_DIR", "."),
        "deterministic": False,
        "seed": 0,
        "jobs": 1,
        "plot": False,
    }


def _deep_merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _apply_override(doc: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects KEY=VALUE, got {assignment!r}")
    path, _, raw = assignment.partition("=")
    keys = [k for k in path.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"--set has an empty key in {assignment!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = doc
    for key in keys[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
            node[key] = child
        node = child
    node[keys[-1]] = value


def _derive_sim(doc: dict, params: LacunaryParams) -> dict:
    """Fill missing integrator settings from the construction scale."""
    sim = dict(doc.get("sim") or {})
    if "N" not in sim:
        sim["N"] = min(validate_resolution(params, 8).minimal_N, 128)
    if "T" not in sim:
        sim["T"] = min(0.25, params.T)
    if "dt" not in sim:
        u0, _ = make_initial_data(params)
        speed = max(1.0, u0.l1_coefficients())
        sim["dt"] = min(1e-3, 0.4 / (sim["N"] * speed))
    sim.setdefault("snapshot_times", [sim["T"]])
    return sim


def load_config(
    config_path: str | None = None,
    overrides: tuple[str, ...] = (),
    command: str | None = None,
    jobs: int | None = None,
    plot: bool | None = None,
    deterministic: bool | None = None,
) -> RunConfig:
    """Resolve defaults, config file, --set overrides, and direct flags."""
    doc = _defaults()
    if config_path is not None:
        try:
            with open(config_path, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {config_path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {config_path} must hold a JSON object")
        doc = _deep_merge(doc, loaded)
    for assignment in overrides:
        _apply_override(doc, assignment)
    if command is not None:
        existing = doc.get("command")
        if existing is not None and existing != command:
            raise ConfigError(
                f"command {command!r} conflicts with config command {existing!r}"
            )
        doc["command"] = command
    if jobs is not None:
        doc["jobs"] = jobs
    if plot:
        doc["plot"] = True
    if deterministic:
        doc["deterministic"] = True

    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config key {where}: {exc.message}") from exc

    try:
        params = LacunaryParams(**doc["params"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key params: {exc}") from exc
    try:
        tgrid = TGridSpec(**doc["tgrid"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key tgrid: {exc}") from exc

    sim = None
    if doc["command"] == "simulate":
        doc["sim"] = _derive_sim(doc, params)
    if doc.get("sim") is not None:
        sim_doc = dict(doc["sim"])
        sim_doc["snapshot_times"] = tuple(sim_doc.get("snapshot_times", ()))
        try:
            sim = SimConfig(**sim_doc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key sim: {exc}") from exc

    return RunConfig(
        command=doc["command"],
        params=params,
        sim=sim,
        tgrid=tgrid,
        output_dir=doc["output_dir"],
        deterministic=bool(doc["deterministic"]),
        seed=int(doc["seed"]),
        jobs=int(doc["jobs"]),
        plot=bool(doc["plot"]),
        times=tuple(float(t) for t in doc["times"]),
        sweep=dict(doc["sweep"]),
        witness=dict(doc["witness"]),
        document=doc,
    )


# -- artifact emission -------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str, header, rows, seed: int, deterministic: bool) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# seed={seed} deterministic={_fmt(bool(deterministic))}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _report_rows(reports) -> list[list]:
    rows = []
    for rp in reports:
        rows.append(
            [
                rp.name,
                rp.params.get("r", ""),
                rp.params.get("t", ""),
                rp.lhs,
                rp.rhs_model,
                rp.implied_constant,
                rp.bound,
                rp.kind,
                bool(rp.passed),
                rp.note,
            ]
        )
    return rows


def emit_csv(
    result: SweepResult, path: str, seed: int = 0, deterministic: bool = False
) -> None:
    """Write a sweep as CSV: inflation columns when rows are present,
    otherwise one line per bound report."""
    if result.rows:
        rows = [[getattr(row, col) for col in _SWEEP_COLUMNS] for row in result.rows]
        _write_csv(path, _SWEEP_COLUMNS, rows, seed, deterministic)
    else:
        _write_csv(path, _REPORT_COLUMNS, _report_rows(result.reports), seed, deterministic)


def emit_plot(result: SweepResult, path: str, deterministic: bool = False) -> None:
    """Standalone SVG line chart on log-log axes; empty input gives empty axes."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with plt.rc_context({"svg.hashsalt": "norminflate", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        ax.set_xscale("log")
        ax.set_yscale("log")
        if result.rows:
            rs = [row.r for row in result.rows]
            ax.plot(rs, [row.rho10_besov for row in result.rows], "o-", label="resonant norm")
            ax.plot(rs, [row.correction_sum for row in result.rows], "s--", label="correction sum")
            net = [(row.r, row.net_lower_bound) for row in result.rows if row.net_lower_bound > 0]
            if net:
                ax.plot([p[0] for p in net], [p[1] for p in net], "^-", label="net lower bound")
            ax.set_xlabel("ladder height r")
            ax.set_ylabel("value")
            ax.legend()
        elif result.reports:
            series: dict[str, list[tuple[int, float]]] = {}
            for rp in result.reports:
                r = rp.params.get("r")
                if isinstance(r, int) and r > 0 and rp.implied_constant > 0:
                    series.setdefault(rp.name, []).append((r, rp.implied_constant))
            for name, points in sorted(series.items()):
                by_r: dict[int, float] = {}
                for r, c in points:
                    by_r[r] = max(by_r.get(r, 0.0), c)
                rs = sorted(by_r)
                ax.plot(rs, [by_r[r] for r in rs], "o-", label=name)
            if series:
                ax.set_xlabel("ladder height r")
                ax.set_ylabel("implied constant")
                ax.legend(fontsize=7)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def _print_report(rp: BoundReport) -> None:
    status = "pass" if rp.passed else "FAIL"
    where = []
    if "r" in rp.params:
        where.append(f"r={rp.params['r']}")
    if "t" in rp.params:
        where.append(f"t={rp.params['t']:.6g}")
    loc = " ".join(where)
    print(
        f"[{status}] {rp.name} {loc}: implied={rp.implied_constant:.6g} "
        f"{'<=' if rp.kind == 'upper' else '>='} {rp.bound:.6g}"
    )


def _out(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.output_dir, name)


# -- subcommands -------------------------------------------------------------


def _cmd_construct(cfg: RunConfig) -> int:
    p = cfg.params
    triples = make_frequencies(p)
    report = verify_construction(p)
    rows = []
    for tr in triples:
        v = tr.v_float()
        rows.append(
            [
                tr.index,
                tr.kbar,
                tr.kprime[0],
                tr.kprime[1],
                tr.kprime[2],
                tr.k[0],
                tr.k[1],
                tr.k[2],
                float(v[0]),
                float(v[1]),
                float(v[2]),
                p.amplitude * tr.k_norm(),
            ]
        )
    header = (
        "i",
        "kbar",
        "kprime_1",
        "kprime_2",
        "kprime_3",
        "k_1",
        "k_2",
        "k_3",
        "v_1",
        "v_2",
        "v_3",
        "amplitude",
    )
    path = _out(cfg, "frequencies.csv")
    _write_csv(path, header, rows, cfg.seed, cfg.deterministic)
    print(
        f"construct: r={p.r} K={p.K} rows={len(rows)} exact_identities="
        f"{_fmt(report.ok)} deviation={report.frequency_deviation:.3e}"
    )
    print(f"wrote {path}")
    return _EXIT_OK


def _cmd_picard(cfg: RunConfig) -> int:
    p = cfg.params
    u0, rho0 = make_initial_data(p)
    horizon = min(1.0, p.T)
    times = cfg.times or tuple(horizon * f for f in (0.125, 0.25, 0.5, 1.0))
    rows = []
    for t in times:
        if not 0.0 < t <= 1.0:
            raise ConfigError(f"picard time {t} outside (0, 1]")
        u1 = bilinear("B1", u0, u0, t) + bilinear("B2", u0, rho0, t)
        rho1 = bilinear("B3", u0, rho0, t)
        in_window = t <= p.T + 1e-12
        rows.append(
            [
                t,
                rho10_amplitude(p, t),
                rho10_coefficient(p, t),
                theta_sup_bound(p, t),
                rho11_sup_bound(p, t),
                rho12_sup_bound(p, t),
                u1.l1_coefficients(),
                rho1.l1_coefficients(),
                remainder_bound_M(p, min(t, p.T)) if in_window else math.nan,
                remainder_bound_z(p, min(t, p.T)) if in_window else math.nan,
            ]
        )
    header = (
        "t",
        "rho10_amplitude",
        "rho10_coefficient",
        "theta_sup",
        "rho11_sup",
        "rho12_sup",
        "u1_l1",
        "rho1_l1",
        "remainder_M",
        "remainder_z",
    )
    path = _out(cfg, "picard.csv")
    _write_csv(path, header, rows, cfg.seed, cfg.deterministic)
    print(f"picard: r={p.r} K={p.K} times={len(rows)}")
    print(f"wrote {path}")
    return _EXIT_OK


def _cmd_besov(cfg: RunConfig) -> int:
    p = cfg.params
    u0, rho0 = make_initial_data(p)
    orders = sorted({1.0, p.s})
    rows = []
    for label, f in (("u0", u0), ("rho0", rho0)):
        for s in orders:
            est = besov_norm(f, s, cfg.tgrid)
            rows.append([label, s, est.value, est.argmax_t, est.upper, est.at_endpoint])
    header = ("field", "s", "value", "argmax_t", "upper", "at_endpoint")
    path = _out(cfg, "besov.csv")
    _write_csv(path, header, rows, cfg.seed, cfg.deterministic)
    for row in rows:
        print(f"besov: {row[0]} s={row[1]} value={row[2]:.8g} argmax_t={row[3]:.6g}")
    print(f"wrote {path}")
    return _EXIT_OK


def _cmd_simulate(cfg: RunConfig) -> int:
    p = cfg.params
    sim = cfg.sim
    check = validate_resolution(p, sim.N)
    if not check.ok:
        raise ConfigError(
            f"config key sim.N: N={sim.N} cannot resolve the first interactions "
            f"for r={p.r}, K={p.K}; minimal admissible N is {check.minimal_N}"
        )
    u0, rho0 = make_initial_data(p)
    try:
        traj = simulate(u0, rho0, sim)
    except ValueError as exc:
        raise ConfigError(f"config key sim: {exc}") from exc
    except SimulationError as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return _EXIT_USAGE
    print(
        f"simulate: N={sim.N} steps={traj.n_steps} "
        f"max_divergence={traj.max_divergence:.3e} rho_drift={traj.rho_mean_drift:.3e}"
    )
    rows = []
    for idx, (t, u_grid, rho_grid) in enumerate(traj):
        snap_path = _out(cfg, f"snapshot_{idx:03d}.bin")
        save_snapshot(snap_path, t, u_grid, rho_grid)
        print(f"wrote {snap_path}")
        if 0.0 < t <= min(1.0, p.T) + 1e-12:
            state = first_iterates(u0, rho0, t, params=p)
            rep = residual_decompose((t, u_grid, rho_grid), state, p)
            rows.append(
                [
                    rep.t,
                    rep.y_linf,
                    rep.z_linf,
                    rep.picard_linf,
                    rep.bound_M,
                    remainder_bound_z(p, min(t, p.T)),
                ]
            )
    header = ("t", "y_linf", "z_linf", "picard_linf", "bound_M", "bound_z")
    path = _out(cfg, "residuals.csv")
    _write_csv(path, header, rows, cfg.seed, cfg.deterministic)
    print(f"wrote {path}")
    return _EXIT_OK


def _check_bundle(r: int, nu: float, delta: float, s: float) -> list[BoundReport]:
    p = params_from_rule(r, nu=nu, delta=delta, s=s)
    reports: list[BoundReport] = []
    for gamma in (1.0, 2.0):
        reports.extend(check_lacunary_sums(p, gamma))
    reports.extend(check_data_norms(p))
    reports.extend(check_rho1_bounds(p).reports)
    return reports


def _cmd_sweep(cfg: RunConfig) -> int:
    p = cfg.params
    rs = [int(r) for r in cfg.sweep.get("rs", [4, 8, 16, 32, 64])]
    result = inflation_experiment(rs, nu=p.nu, delta=p.delta, s=p.s)
    path = _out(cfg, "sweep.csv")
    emit_csv(result, path, cfg.seed, cfg.deterministic)
    print(f"sweep: heights={rs} slope={result.slope:.6g}")
    print(f"wrote {path}")
    if cfg.plot:
        svg = _out(cfg, "sweep.svg")
        emit_plot(result, svg, cfg.deterministic)
        print(f"wrote {svg}")

    reports: list[BoundReport] = []
    if cfg.sweep.get("checks", True):
        bundle = functools.partial(_check_bundle, nu=p.nu, delta=p.delta, s=p.s)
        if cfg.jobs > 1:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                for chunk in pool.map(bundle, rs):
                    reports.extend(chunk)
        else:
            for r in rs:
                reports.extend(bundle(r))
    trials = int(cfg.sweep.get("trials", 0))
    if trials > 0:
        reports.extend(operator_norm_probes(trials, seed=cfg.seed))
    if reports:
        check_result = SweepResult(reports=tuple(reports))
        bounds_path = _out(cfg, "bounds.csv")
        emit_csv(check_result, bounds_path, cfg.seed, cfg.deterministic)
        for rp in reports:
            _print_report(rp)
        print(f"wrote {bounds_path}")
        if cfg.plot:
            svg = _out(cfg, "bounds.svg")
            emit_plot(check_result, svg, cfg.deterministic)
            print(f"wrote {svg}")
        if not check_result.ok:
            failed = sum(1 for rp in reports if not rp.passed)
            print(f"{failed} frozen regression bound(s) failed", file=sys.stderr)
            return _EXIT_REGRESSION
    return _EXIT_OK


def _cmd_witness(cfg: RunConfig) -> int:
    w = cfg.witness
    try:
        report = theorem_witness(
            float(w.get("epsilon", 0.9)),
            float(w.get("s", cfg.params.s)),
            nu=float(w.get("nu", 0.5)),
            delta=float(w.get("delta", cfg.params.delta)),
        )
    except ValueError as exc:
        raise ConfigError(f"config key witness: {exc}") from exc
    header = (
        "epsilon",
        "s",
        "nu",
        "r",
        "T",
        "norm_u0",
        "norm_rho0",
        "certified_lower",
        "threshold",
        "found",
        "data_margin",
        "time_margin",
        "inflation_margin",
    )
    row = [
        report.epsilon,
        report.s,
        report.nu,
        report.r,
        report.T,
        report.norm_u0,
        report.norm_rho0,
        report.certified_lower,
        report.threshold,
        report.found,
        report.data_margin,
        report.time_margin,
        report.inflation_margin,
    ]
    path = _out(cfg, "witness.csv")
    _write_csv(path, header, [row], cfg.seed, cfg.deterministic)
    print(f"witness: {report.message} certified={report.certified_lower:.6g} threshold={report.threshold:.6g}")
    print(f"wrote {path}")
    return _EXIT_OK


_DISPATCH = {
    "construct": _cmd_construct,
    "picard": _cmd_picard,
    "simulate": _cmd_simulate,
    "besov": _cmd_besov,
    "sweep": _cmd_sweep,
    "witness": _cmd_witness,
}


def run(
    config_path: str | None = None,
    overrides: tuple[str, ...] = (),
    command: str | None = None,
    jobs: int | None = None,
    plot: bool | None = None,
    deterministic: bool | None = None,
) -> int:
    """Execute one configured pipeline and return the process exit code."""
    try:
        cfg = load_config(config_path, tuple(overrides), command, jobs, plot, deterministic)
        os.makedirs(cfg.output_dir, exist_ok=True)
        resolved = _out(cfg, "resolved_config.json")
        with open(resolved, "w", encoding="utf-8", newline="") as fh:
            json.dump(cfg.document, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {resolved}")
        return _DISPATCH[cfg.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_USAGE


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="norminflate",
        description="Numerical laboratory for the lacunary norm-inflation construction.",
    )
    parser.add_argument("command", nargs="?", choices=_COMMANDS, help="pipeline to run")
    parser.add_argument("--config", metavar="PATH", help="JSON configuration file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config entry (dotted path, JSON value)",
    )
    parser.add_argument("--jobs", type=int, default=None, metavar="N", help="parallel sweep evaluation")
    parser.add_argument("--plot", action="store_true", default=None, help="emit SVG plots")
    parser.add_argument(
        "--deterministic",
        action="store_true",
        default=None,
        help="byte-identical CSV output for identical configs",
    )
    args = parser.parse_args(argv)
    if args.command is None and args.config is None:
        parser.print_usage(sys.stderr)
        print("error: need a command or a --config file naming one", file=sys.stderr)
        return _EXIT_USAGE
    return run(
        args.config,
        overrides=tuple(args.overrides),
        command=args.command,
        jobs=args.jobs,
        plot=args.plot,
        deterministic=args.deterministic,
    )


if __name__ == "__main__":
    sys.exit(main())
