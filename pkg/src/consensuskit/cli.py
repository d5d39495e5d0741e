"""Command-line front end.

    consensuskit synthesize scenario.json
    consensuskit simulate scenario.json --out run.csv [--svg run.svg]
    consensuskit simulate-switching scenario.json --out run.csv
    consensuskit montecarlo scenario.json --runs 200 --out ms.csv
    consensuskit analyze scenario.json [--window T0:T1]

Exit codes: 0 on success, 1 for bad input (parse, validation, or synthesis
failures, missing files), 2 for runtime failures (finite escape, a beta
hitting its floor, solver breakdowns).  Errors are emitted as a single JSON
object on stderr; command results go to stdout as JSON, trajectories to CSV
files.  All numeric CSV fields use repr-faithful %.17g formatting so reruns
are byte-identical.
"""

import argparse
import csv
import json
import sys
from dataclasses import replace

import numpy as np

from .errors import (
    ConsensusKitError,
    ScenarioParseError,
    SynthesisError,
    ValidationError,
)
from .graph import laplacian, union
from .metrics import (
    disagreement,
    empirical_rate,
    theoretical_speed_fixed,
    theoretical_speed_switching,
)
from .scenario import load_scenario
from .sim import (
    monte_carlo_ms,
    simulate_fixed,
    simulate_switching,
    simulate_with_observer,
)
from .switching import MarkovTopology, check_A4
from .synthesis import closed_loop_spectrum

__all__ = ["main"]


def _fmt(x):
    return format(float(x), ".17g")


def _cpairs(values):
    return [[float(v.real), float(v.imag)] for v in np.asarray(values).ravel()]


def _emit_error(exc):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("field", "line", "column", "agent_id", "t"):
        value = getattr(exc, attr, None)
        if value is not None:
            payload[attr] = value
    print(json.dumps(payload), file=sys.stderr)


def _apply_overrides(scen, args):
    if getattr(args, "seed", None) is not None:
        scen = replace(scen, seed=args.seed)
    return scen


def _output_cfg(scen, args):
    cfg = dict(scen.output or {})
    if getattr(args, "out", None):
        cfg["csv"] = args.out
    if getattr(args, "svg", None):
        cfg["svg"] = args.svg
    if getattr(args, "full_state", False):
        cfg["full_state"] = True
    cfg.setdefault("full_state", False)
    return cfg


def _write_trajectory_csv(path, traj, full_state):
    n_samples, n_agents = traj.y.shape
    header = ["t"] + [f"y{i + 1}" for i in range(n_agents)]
    err_norm = None
    if traj.err is not None:
        err_norm = np.linalg.norm(traj.err, axis=2)
        header += [f"e{i + 1}" for i in range(n_agents)]
    if traj.mode is not None:
        header += ["mode"]
    if full_state:
        r = traj.xi_hat.shape[2]
        for i in range(n_agents):
            header += [f"xi{i + 1}_{k + 1}" for k in range(r)]
            header += [f"eta{i + 1}_{k + 1}"
                       for k in range(traj.eta[i].shape[1])]
            header += [f"u{i + 1}"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(n_samples):
            row = [_fmt(traj.times[k])]
            row += [_fmt(v) for v in traj.y[k]]
            if err_norm is not None:
                row += [_fmt(v) for v in err_norm[k]]
            if traj.mode is not None:
                row += [str(int(traj.mode[k]) + 1)]
            if full_state:
                for i in range(n_agents):
                    row += [_fmt(v) for v in traj.xi_hat[k, i]]
                    row += [_fmt(v) for v in traj.eta[i][k]]
                    row += [_fmt(traj.u[k, i])]
            writer.writerow(row)


def _write_mc_csv(path, result):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "mean_square"])
        for t, v in zip(result.times, result.mean_square):
            writer.writerow([_fmt(t), _fmt(v)])


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd",
            "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]


def _write_svg(path, times, series, ylabel="y"):
    """Self-contained line plot; one polyline per column of `series`."""
    width, height = 800, 500
    ml, mr, mtop, mb = 60.0, 15.0, 15.0, 40.0
    pw, ph = width - ml - mr, height - mtop - mb
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    stride = max(1, len(times) // 2000)
    tt = times[::stride]
    ss = series[::stride]
    t_lo, t_hi = float(tt[0]), float(tt[-1])
    if t_hi <= t_lo:
        t_hi = t_lo + 1.0
    y_lo, y_hi = float(ss.min()), float(ss.max())
    if y_hi <= y_lo:
        y_hi, y_lo = y_lo + 0.5, y_lo - 0.5
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(t):
        return ml + pw * (t - t_lo) / (t_hi - t_lo)

    def py(v):
        return mtop + ph * (1.0 - (v - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{ml}" y="{mtop}" width="{pw}" height="{ph}" '
        'fill="none" stroke="#444" stroke-width="1"/>',
    ]
    if y_lo < 0.0 < y_hi:
        zy = py(0.0)
        parts.append(f'<line x1="{ml}" y1="{zy:.2f}" x2="{ml + pw}" '
                     f'y2="{zy:.2f}" stroke="#bbb" stroke-width="1" '
                     'stroke-dasharray="4 3"/>')
    for j in range(ss.shape[1]):
        color = _PALETTE[j % len(_PALETTE)]
        pts = " ".join(f"{px(t):.2f},{py(v):.2f}"
                       for t, v in zip(tt, ss[:, j]))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.2"/>')
    style = 'font-family="sans-serif" font-size="12" fill="#222"'
    parts.append(f'<text x="{ml}" y="{height - 10}" {style}>'
                 f't = {t_lo:g} .. {t_hi:g}</text>')
    parts.append(f'<text x="8" y="{mtop + 12}" {style}>{ylabel} in '
                 f'[{y_lo:.3g}, {y_hi:.3g}]</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def _spectrum_payload(scen, lap):
    check = closed_loop_spectrum(scen.cs, scen.gain, lap)
    payload = {"values": _cpairs(check.values)}
    if check.analytic_consistent is not None:
        payload["analytic_consistent"] = bool(check.analytic_consistent)
    return payload


def _cmd_synthesize(args):
    scen = load_scenario(args.scenario)
    cs, gain = scen.cs, scen.gain
    out = {
        "r": cs.r,
        "b": [float(v) for v in cs.b],
        "nu": [float(v) for v in cs.nu],
        "target_poles": _cpairs(cs.stable_poles),
        "rank": gain.rank,
        "K": [float(v) for v in gain.K],
        "P1": [[float(v) for v in row] for row in gain.P1],
    }
    if isinstance(scen.topology, MarkovTopology):
        mt = scen.topology
        lap = laplacian(union(mt.graphs))
        report = check_A4(mt)
        out["stationary"] = [float(v) for v in mt.pi]
        out["assumption"] = {
            "union_has_spanning_tree": report.union_has_spanning_tree,
            "union_balanced": report.union_balanced,
            "passes": report.passes,
        }
        if gain.rank == "one" and report.passes:
            out["guaranteed_rate"] = theoretical_speed_switching(mt, gain, cs)
    else:
        lap = laplacian(scen.topology)
        if gain.rank == "one":
            try:
                out["guaranteed_rate"] = theoretical_speed_fixed(cs, gain, lap)
            except ConsensusKitError:
                pass
    out["spectrum"] = _spectrum_payload(scen, lap)
    print(json.dumps(out, indent=2))
    return 0


def _run_and_write(scen, traj, args):
    cfg = _output_cfg(scen, args)
    if "csv" not in cfg:
        raise ValidationError(
            "no CSV output path; pass --out or set output.csv",
            field="output.csv")
    _write_trajectory_csv(cfg["csv"], traj, cfg["full_state"])
    summary = {
        "csv": cfg["csv"],
        "samples": int(traj.times.shape[0]),
        "final_disagreement": float(disagreement(traj)[-1]),
    }
    if "svg" in cfg:
        _write_svg(cfg["svg"], traj.times, traj.y)
        summary["svg"] = cfg["svg"]
    print(json.dumps(summary))
    return 0


def _cmd_simulate(args):
    scen = _apply_overrides(load_scenario(args.scenario), args)
    if scen.observer is not None:
        traj = simulate_with_observer(scen)
    else:
        traj = simulate_fixed(scen)
    return _run_and_write(scen, traj, args)


def _cmd_simulate_switching(args):
    scen = _apply_overrides(load_scenario(args.scenario), args)
    traj = simulate_switching(scen,
                              allow_a4_violation=args.allow_a4_violation)
    return _run_and_write(scen, traj, args)


def _cmd_montecarlo(args):
    scen = _apply_overrides(load_scenario(args.scenario), args)
    result = monte_carlo_ms(scen, args.runs)
    cfg = _output_cfg(scen, args)
    if "csv" not in cfg:
        raise ValidationError(
            "no CSV output path; pass --out or set output.csv",
            field="output.csv")
    _write_mc_csv(cfg["csv"], result)
    if "svg" in cfg:
        _write_svg(cfg["svg"], result.times,
                   result.mean_square.reshape(-1, 1), ylabel="mean square")
    print(json.dumps({
        "csv": cfg["csv"],
        "runs_used": result.runs_used,
        "runs_diverged": result.runs_diverged,
        "final_mean_square": float(result.mean_square[-1]),
    }))
    return 0


def _parse_window(text):
    parts = text.split(":")
    if len(parts) != 2:
        raise ValidationError("window must look like T0:T1", field="--window")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ValidationError("window must look like T0:T1",
                              field="--window") from exc


def _cmd_analyze(args):
    scen = _apply_overrides(load_scenario(args.scenario), args)
    window = _parse_window(args.window) if args.window else None
    switching = isinstance(scen.topology, MarkovTopology)
    if switching:
        traj = simulate_switching(scen)
        lap = laplacian(union(scen.topology.graphs))
    else:
        if scen.observer is not None:
            traj = simulate_with_observer(scen)
        else:
            traj = simulate_fixed(scen)
        lap = laplacian(scen.topology)
    d = disagreement(traj)
    fit = empirical_rate(traj.times, d, window)
    theoretical = None
    if scen.gain.rank == "one":
        try:
            if switching:
                theoretical = theoretical_speed_switching(
                    scen.topology, scen.gain, scen.cs)
            else:
                theoretical = theoretical_speed_fixed(scen.cs, scen.gain, lap)
        except ConsensusKitError:
            theoretical = None
    out = {
        "empirical_rate": fit.rate,
        "r_squared": fit.r_squared,
        "window": [fit.window[0], fit.window[1]],
        "final_disagreement": float(d[-1]),
        "theoretical_rate": theoretical,
        "spectrum": _spectrum_payload(scen, lap),
    }
    print(json.dumps(out, indent=2))
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="consensuskit",
        description="Rank-one output-consensus synthesis and simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="print the synthesized design")
    p.add_argument("scenario")
    p.set_defaults(func=_cmd_synthesize)

    for name, func, switching in (
            ("simulate", _cmd_simulate, False),
            ("simulate-switching", _cmd_simulate_switching, True)):
        p = sub.add_parser(name, help=f"run a {'switching' if switching else 'fixed-topology'} simulation")
        p.add_argument("scenario")
        p.add_argument("--out", help="trajectory CSV path")
        p.add_argument("--svg", help="output plot path")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--full-state", action="store_true",
                       help="append chain, internal, and input columns")
        if switching:
            p.add_argument("--allow-a4-violation", action="store_true",
                           help="simulate even if the union graph fails "
                                "the connectivity/balance assumption")
        p.set_defaults(func=func)

    p = sub.add_parser("montecarlo",
                       help="mean-square disagreement over repeated runs")
    p.add_argument("scenario")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--out", help="CSV path")
    p.add_argument("--svg", help="output plot path")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.set_defaults(func=_cmd_montecarlo)

    p = sub.add_parser("analyze", help="rates and spectra as JSON")
    p.add_argument("scenario")
    p.add_argument("--window", help="rate-fit window T0:T1")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.set_defaults(func=_cmd_analyze)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioParseError, ValidationError, SynthesisError) as exc:
        _emit_error(exc)
        return 1
    except OSError as exc:
        _emit_error(exc)
        return 1
    except ConsensusKitError as exc:
        _emit_error(exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
