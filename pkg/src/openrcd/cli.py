"""Command-line front end.

Subcommands: ``run`` (simulate, write CSVs and an SVG), ``bounds`` (table of
closed-form quantities), ``compare`` (empirical tail versus the open-system
bound), ``preset-list`` and ``replay`` (exact re-run of a replay log).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds
from .config import ConfigError, ExperimentConfig, PRESETS, open_bound_for, parse_config, preset, sweep_range
from .engine import EnsembleResult, replay, run_ensemble

OUTPUT_ENV = "OPENRCD_OUTPUT_DIR"
TRAJECTORY_COLUMNS = ("k", "mean_seminorm_err_sq", "ci_low", "ci_high", "event_mix")
BOUND_COLUMNS = ("k", "envelope")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, columns, rows, meta=None):
    """CSV with ``# key = value`` metadata lines before the header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="\n") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key} = {value}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _column(cells):
    try:
        return np.array([float(v) for v in cells])
    except ValueError:
        return np.array(cells)


def read_csv(path):
    """Inverse of :func:`write_csv`: ``(meta, {column: array})``.

    Numeric columns come back as float arrays, others as string arrays.
    """
    meta, header, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append(line.split(","))
    return meta, {name: _column([r[i] for r in rows]) for i, name in enumerate(header)}


def trajectory_rows(result: EnsembleResult):
    for k in range(result.horizon + 1):
        yield (k, result.mean_seminorm[k], result.ci_low[k], result.ci_high[k], result.update_fraction[k])


def _trajectory_meta(cfg, policy, n_realizations, horizon):
    return {
        "experiment": cfg.name,
        "policy": policy,
        "seed": cfg.seed,
        "n_realizations": n_realizations,
        "horizon": horizon,
        "error_sampling": "after every event",
    }


def write_trajectory(path, cfg, policy, result):
    meta = _trajectory_meta(cfg, policy, result.n_realizations, result.horizon)
    write_csv(path, TRAJECTORY_COLUMNS, trajectory_rows(result), meta)


def _output_dir(cfg, override=None) -> Path:
    return Path(override or cfg.output_dir or os.environ.get(OUTPUT_ENV) or ".")


def load_config(args) -> ExperimentConfig:
    cfg = preset(args.preset) if getattr(args, "preset", None) else ExperimentConfig()
    if getattr(args, "config", None):
        cfg = parse_config(Path(args.config).read_text(), cfg)
    return cfg.with_overrides(getattr(args, "set", None) or [])


def simulate(cfg: ExperimentConfig, policy: str, log=None, check=False):
    """Run the ensemble of one policy; returns ``(h, result)``."""
    system = cfg.system()
    h, _, _, _ = open_bound_for(cfg, system)
    result = run_ensemble(system, cfg.event_config(policy), h, cfg.horizon, cfg.n_realizations,
                          chunk_size=cfg.chunk_size, check_invariants=check, log=log)
    return h, result


def envelope_for(cfg, c0):
    """``(ks, envelope, OptimalOpenBound)`` over the configured horizon."""
    _, ob, _, _ = open_bound_for(cfg, cfg.system())
    ks = np.arange(cfg.horizon + 1)
    return ks, bounds.envelope(ob.a_eta, ob.gamma_eta, c0, ks), ob


def tail_window(horizon: int) -> int:
    """Number of trailing records forming the last 10% of events."""
    return max(1, horizon // 10)


def compare_result(result: EnsembleResult, env: np.ndarray, gamma: float) -> dict:
    tail = float(result.mean_seminorm[-tail_window(result.horizon):].mean())
    respected = result.mean_seminorm <= env * (1 + 1e-12)
    return {
        "tail_mean": tail,
        "gamma": gamma,
        "tail_below_gamma": tail < gamma,
        "envelope_fraction": float(respected.mean()),
    }


def write_log(path, cfg, policy, realizations):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write("# replay log\n")
        for line in cfg.to_text().splitlines():
            fh.write(f"config {line}\n")
        fh.write(f"policy {policy}\n")
        for r, lines in enumerate(realizations):
            fh.write(f"realization {r}\n")
            for line in lines:
                fh.write(line + "\n")


def read_log(path):
    """``(config, policy, [lines of each realization])``."""
    cfg_lines, policy, blocks = [], None, []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        if line.startswith("config "):
            cfg_lines.append(line[len("config "):])
        elif line.startswith("policy "):
            policy = line.split(" ", 1)[1]
        elif line.startswith("realization "):
            blocks.append([])
        else:
            if not blocks:
                raise ConfigError("replay log event before any realization header")
            blocks[-1].append(line)
    return parse_config("\n".join(cfg_lines)), policy, blocks


def render_svg(path, results: dict, ks, env, gamma, title=""):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    styles = {"random": ("tab:blue", "-"), "adversarial": ("tab:red", "--")}
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for policy, res in results.items():
        color, ls = styles.get(policy, ("black", "-"))
        ax.plot(ks, res.mean_seminorm, color=color, ls=ls, lw=1.2, label=f"{policy} replacements")
    ax.plot(ks, env, color="goldenrod", ls=":", lw=1.8, label="bound")
    if math.isfinite(gamma) and gamma > 0:
        ax.axhline(gamma, color="goldenrod", lw=0.6, alpha=0.6)
    ax.set_yscale("log")
    ax.set_xlabel("event k")
    ax.set_ylabel("mean squared seminorm error")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def bounds_rows(cfg: ExperimentConfig):
    """``(columns, rows)`` of the bounds table.

    With ``sweep_n`` set, one row per system size with the three
    minimizer-change quantities; otherwise ``quantity, value`` pairs.
    """
    if cfg.sweep_n:
        rows = []
        for n in sweep_range(cfg):
            p = bounds.ProblemParams.build(cfg.weight_vector(n), cfg.alpha, cfg.beta, cfg.c, cfg.budget)
            mc = bounds.min_change_bound(p)
            rows.append((n, mc.psi, mc.chi, mc.theta, mc.m_bar_sq, mc.active))
        return ("n", "psi", "chi", "theta", "m_bar_sq", "active"), rows
    system = cfg.system()
    p = system.problem_params()
    sp = system.spectrum
    h, ob, mc, m = open_bound_for(cfg, system)
    out = [
        ("radius_global", bounds.radius_global(p)),
        ("lambda_star_bound", bounds.lambda_star_bound(p)),
        ("local_bound_a_plus", bounds.local_minimizer_bound(p, p.a_plus)),
        ("psi", mc.psi),
        ("chi", mc.chi),
        ("theta", mc.theta),
        ("m_bar_sq", mc.m_bar_sq),
        ("m", m),
        ("lambda2", sp.lambda2),
        ("lambdan", sp.lambdan),
        ("h", h),
        ("h_max_general", bounds.admissible_h_general(sp.lambda2, sp.lambdan, cfg.alpha, cfg.beta)),
        ("rho_r", (1 - cfg.p_u) / cfg.p_u),
        ("eta_bar", ob.eta_bar),
        ("eta_star", ob.eta),
        ("a_eta_star", ob.a_eta),
        ("gamma_eta_star", ob.gamma_eta),
    ]
    if h <= bounds.admissible_h_general(sp.lambda2, sp.lambdan, cfg.alpha, cfg.beta) * (1 + 1e-12):
        out.append(("closed_rate", bounds.closed_rate(sp.lambda2, sp.lambdan, cfg.alpha, cfg.beta, h)))
    return ("quantity", "value"), out


def cmd_run(args):
    cfg = load_config(args)
    outdir = _output_dir(cfg, args.output_dir)
    results = {}
    for policy in cfg.policies:
        log = [] if args.log else None
        _, res = simulate(cfg, policy, log=log, check=args.check)
        results[policy] = res
        write_trajectory(outdir / f"{cfg.name}_{policy}_trajectory.csv", cfg, policy, res)
        if log is not None:
            write_log(outdir / f"{cfg.name}_{policy}.replay", cfg, policy, log)
    c0 = next(iter(results.values())).mean_seminorm[0]
    ks, env, ob = envelope_for(cfg, c0)
    meta = {"experiment": cfg.name, "m_mode": cfg.m_mode, "eta_star": repr(ob.eta),
            "a_eta_star": repr(ob.a_eta), "gamma_eta_star": repr(ob.gamma_eta)}
    write_csv(outdir / f"{cfg.name}_bound.csv", BOUND_COLUMNS, zip(ks, env), meta)
    if not args.no_svg:
        render_svg(outdir / f"{cfg.name}.svg", results, ks, env, ob.gamma_eta, cfg.name)
    print(f"wrote outputs for {cfg.name} to {outdir}")
    return 0


def cmd_bounds(args):
    cfg = load_config(args)
    columns, rows = bounds_rows(cfg)
    if args.output:
        write_csv(args.output, columns, rows)
        return 0
    print(",".join(columns))
    for row in rows:
        print(",".join(_fmt(v) for v in row))
    return 0


def cmd_compare(args):
    cfg = load_config(args)
    ok = True
    for policy in cfg.policies:
        _, res = simulate(cfg, policy, check=args.check)
        ks, env, ob = envelope_for(cfg, res.mean_seminorm[0])
        rep = compare_result(res, env, ob.gamma_eta)
        verdict = "yes" if rep["tail_below_gamma"] else "no"
        print(f"{cfg.name} [{policy}]: tail mean {rep['tail_mean']:.6g} below Gamma* {rep['gamma']:.6g}: "
              f"{verdict}; envelope respected at {100 * rep['envelope_fraction']:.2f}% of events")
        ok &= rep["tail_below_gamma"] and rep["envelope_fraction"] == 1.0
    return 0 if ok else 1


def cmd_preset_list(args):
    for name, cfg in PRESETS.items():
        print(f"{name:12s} {cfg.description}")
    return 0


def cmd_replay(args):
    cfg, policy, blocks = read_log(args.log)
    system = cfg.system()
    h, _, _, _ = open_bound_for(cfg, system)
    res = replay(system, h, blocks, chunk_size=cfg.chunk_size)
    out = Path(args.output) if args.output else _output_dir(cfg) / f"{cfg.name}_{policy}_replay.csv"
    write_trajectory(out, cfg, policy, res)
    print(f"replayed {res.n_realizations} realizations to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="openrcd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        return p

    p = with_config(sub.add_parser("run", help="simulate and write CSV/SVG outputs"))
    p.add_argument("--output-dir")
    p.add_argument("--log", action="store_true", help="also write replay logs")
    p.add_argument("--check", action="store_true", help="verify feasibility after every event")
    p.add_argument("--no-svg", action="store_true")
    p.set_defaults(func=cmd_run)

    p = with_config(sub.add_parser("bounds", help="print closed-form bounds"))
    p.add_argument("--output", help="write the table as CSV instead of printing")
    p.set_defaults(func=cmd_bounds)

    p = with_config(sub.add_parser("compare", help="check the empirical tail against the bound"))
    p.add_argument("--check", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("preset-list", help="list experiment presets")
    p.set_defaults(func=cmd_preset_list)

    p = sub.add_parser("replay", help="re-run a replay log exactly")
    p.add_argument("log")
    p.add_argument("--output")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, bounds.BoundDomainError, OSError) as exc:
        print(f"openrcd: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
