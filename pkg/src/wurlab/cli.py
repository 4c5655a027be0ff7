"""Command-line front end: defaults, analytic, sweep, simulate, validate.

Data goes to stdout or --out; progress and warnings go to stderr.
Exit codes: 0 success, 1 usage error, 2 validation failure, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys

from . import analytic, metrics
from .config import (ConfigError, MacScheme, default_config,
                     dumps_config, load_config)
from .protocol import run_queue_mode, run_round_mode

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_SOLVER = 3

CSV_COLUMNS = ["scheme", "n", "engine", "alpha", "gamma", "p_loss",
               "d_a_s", "e_r_j", "ci_alpha", "ci_p_loss", "ci_d_a", "ci_e_r"]

ENGINES = ("analytic", "queue_sim", "round_sim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(value):
    if value is None:
        return ""
    try:
        if value != value:   # NaN
            return ""
    except TypeError:
        pass
    return "%.12g" % value


def _parse_scheme(text) -> MacScheme:
    try:
        return MacScheme(text.upper().replace("-", "_"))
    except ValueError:
        raise UsageError(f"unknown scheme '{text}'") from None


def _parse_schemes(text):
    if text.strip().lower() == "all":
        return [MacScheme.SCM, MacScheme.CCA, MacScheme.CSMA_CA, MacScheme.ADP]
    out = [_parse_scheme(part) for part in text.split(",") if part.strip()]
    if not out:
        raise UsageError("empty scheme list")
    return out


def _parse_n_values(text):
    """Comma list and/or 'a..b' / 'a..b..step' ranges, e.g. '5..100' or '5,25,50'."""
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            pieces = part.split("..")
            if len(pieces) not in (2, 3):
                raise UsageError(f"bad range '{part}'")
            try:
                lo, hi = int(pieces[0]), int(pieces[1])
                step = int(pieces[2]) if len(pieces) == 3 else 1
            except ValueError:
                raise UsageError(f"bad range '{part}'") from None
            if step < 1 or hi < lo:
                raise UsageError(f"bad range '{part}'")
            values.extend(range(lo, hi + 1, step))
        else:
            try:
                values.append(int(part))
            except ValueError:
                raise UsageError(f"bad cluster size '{part}'") from None
    if not values:
        raise UsageError("empty n-values list")
    if any(v < 1 for v in values):
        raise UsageError("cluster sizes must be >= 1")
    return values


def _load(args):
    config = load_config(args.config) if args.config else default_config()
    if getattr(args, "seed", None) is not None:
        config = dataclasses.replace(config, seed=args.seed)
    sim = {}
    if getattr(args, "horizon", None) is not None:
        sim["horizon"] = args.horizon
    if getattr(args, "rounds", None) is not None:
        sim["rounds"] = args.rounds
    if sim:
        config = dataclasses.replace(
            config, sim=dataclasses.replace(config.sim, **sim))
    return config.validate()


def _with_n(config, n):
    return config.replace(
        traffic=dataclasses.replace(config.traffic, n_nodes=n))


def _out_stream(args):
    if getattr(args, "out", None):
        return open(args.out, "w", encoding="utf-8", newline="")
    return sys.stdout


def _info(msg):
    print(msg, file=sys.stderr)


# --- subcommands ------------------------------------------------------------

def cmd_defaults(args):
    stream = _out_stream(args)
    stream.write(dumps_config(_load(args)))
    if stream is not sys.stdout:
        stream.close()
    return EXIT_OK


def cmd_analytic(args):
    config = _load(args)
    scheme = _parse_scheme(args.scheme)
    if args.n is not None:
        config = _with_n(config, args.n)
    m = analytic.evaluate_scheme(config, scheme)
    lines = [f"scheme = {scheme.value}", f"n = {config.traffic.n_nodes}"]
    if m.gamma is not None:
        lines.append(f"gamma = {_fmt(m.gamma)}")
    else:
        lines.append(f"alpha = {_fmt(m.alpha)}")
    lines.append(f"p_loss = {_fmt(m.p_loss)}")
    lines.append(f"d_a_s = {_fmt(m.d_a)} s")
    lines.append(f"e_r_j = {_fmt(m.e_r)} J")
    if m.e_tau is not None:
        lines.append(f"e_tau_frames = {_fmt(m.e_tau)}")
    stream = _out_stream(args)
    stream.write("\n".join(lines) + "\n")
    if stream is not sys.stdout:
        stream.close()
    return EXIT_OK


def _analytic_row(config, scheme, n):
    m = analytic.evaluate_scheme(_with_n(config, n), scheme)
    return {"scheme": scheme.value, "n": n, "engine": "analytic",
            "alpha": m.alpha, "gamma": m.gamma, "p_loss": m.p_loss,
            "d_a_s": m.d_a, "e_r_j": m.e_r}


def _queue_row(config, scheme, n):
    log = run_queue_mode(_with_n(config, n), scheme)
    st = metrics.estimate_queue_stats(log, config.sim.warmup_fraction,
                                      scheme=scheme)
    if st.low_data:
        _info(f"warning: low data for {scheme.value} N={n} queue_sim")
    return {"scheme": scheme.value, "n": n, "engine": "queue_sim",
            "alpha": st.empirical_alpha, "p_loss": st.empirical_p_loss,
            "ci_alpha": st.ci_alpha, "ci_p_loss": st.ci_p_loss}, st


def _round_row(config, scheme, n):
    traces = run_round_mode(_with_n(config, n), scheme)
    st = metrics.estimate_round_stats(traces, scheme)
    row = {"scheme": scheme.value, "n": n, "engine": "round_sim",
           "d_a_s": st.mean_round_delay, "e_r_j": st.mean_round_energy,
           "ci_d_a": st.ci_round_delay, "ci_e_r": st.ci_round_energy}
    if st.clustering_success_rate is not None:
        row["p_loss"] = 1.0 - st.clustering_success_rate
        row["ci_p_loss"] = st.ci_success_rate
    if scheme is MacScheme.SCM:
        row["gamma"] = st.collision_rate
    return row, st


def _write_csv(stream, rows):
    order = {"analytic": 0, "queue_sim": 1, "round_sim": 2}
    scheme_order = {s.value: k for k, s in enumerate(MacScheme)}
    rows = sorted(rows, key=lambda r: (scheme_order[r["scheme"]], r["n"],
                                       order[r["engine"]]))
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([row.get("scheme"), row.get("n"), row.get("engine")]
                        + [_fmt(row.get(c)) for c in CSV_COLUMNS[3:]])


def cmd_sweep(args):
    config = _load(args)
    schemes = _parse_schemes(args.schemes)
    n_values = _parse_n_values(args.n_values)
    engines = [e.strip() for e in args.engines.split(",") if e.strip()]
    for engine in engines:
        if engine not in ENGINES:
            raise UsageError(f"unknown engine '{engine}'")
    if not engines:
        raise UsageError("empty engine list")
    rows = []
    for scheme in schemes:
        for n in n_values:
            for engine in engines:
                if engine == "analytic":
                    rows.append(_analytic_row(config, scheme, n))
                elif engine == "queue_sim":
                    if scheme is MacScheme.SCM:
                        _info("note: queue_sim skipped for SCM (no sensing)")
                        continue
                    rows.append(_queue_row(config, scheme, n)[0])
                else:
                    rows.append(_round_row(config, scheme, n)[0])
            _info(f"sweep: {scheme.value} N={n} done")
    stream = _out_stream(args)
    _write_csv(stream, rows)
    if stream is not sys.stdout:
        stream.close()
    return EXIT_OK


def cmd_simulate(args):
    config = _load(args)
    scheme = _parse_scheme(args.scheme)
    if args.n is not None:
        config = _with_n(config, args.n)
    trace = open(args.event_log, "w", encoding="utf-8") if args.event_log else None
    try:
        traces = run_round_mode(config, scheme, trace=trace)
    finally:
        if trace:
            trace.close()
    st = metrics.estimate_round_stats(traces, scheme)
    stream = _out_stream(args)
    success = "" if st.clustering_success_rate is None \
        else _fmt(st.clustering_success_rate)
    stream.write("\n".join([
        f"scheme = {scheme.value}",
        f"n = {config.traffic.n_nodes}",
        f"rounds = {st.n_rounds}",
        f"clustering_success_rate = {success}",
        f"mean_cluster_size = {_fmt(st.mean_cluster_size)}",
        f"mean_round_delay_s = {_fmt(st.mean_round_delay)}",
        f"mean_round_energy_j = {_fmt(st.mean_round_energy)}",
        f"jreq_collision_rate = {_fmt(st.collision_rate)}",
    ]) + "\n")
    if stream is not sys.stdout:
        stream.close()
    return EXIT_OK


def cmd_validate(args):
    config = _load(args)
    schemes = _parse_schemes(args.schemes)
    n_values = _parse_n_values(args.n_values)
    engines = [e.strip() for e in args.engines.split(",") if e.strip()]
    if "analytic" not in engines or not any(e.endswith("_sim") for e in engines):
        raise UsageError("validate needs the analytic engine plus a simulator")
    tolerances = metrics.Tolerances(alpha_abs=args.alpha_tol,
                                    p_loss_abs=args.p_loss_tol,
                                    gamma_abs=args.gamma_tol)
    points = []
    solver_failures = 0
    for scheme in schemes:
        for n in n_values:
            try:
                an = analytic.evaluate_scheme(_with_n(config, n), scheme)
            except analytic.SolverError as exc:
                _info(f"solver failure: {exc}")
                solver_failures += 1
                continue
            qstats = rstats = None
            if "queue_sim" in engines and scheme is not MacScheme.SCM:
                qstats = _queue_row(config, scheme, n)[1]
            if "round_sim" in engines:
                rstats = _round_row(config, scheme, n)[1]
            if qstats is None and rstats is None:
                _info(f"validate: {scheme.value} N={n}: skipped "
                      "(no applicable simulation engine)")
                continue
            point = metrics.compare(an, qstats, rstats, tolerances)
            points.append(point)
            verdict = "pass" if point.passed else "FAIL"
            _info(f"validate: {scheme.value} N={n}: {verdict}")
    report = metrics.ComparisonReport(points=tuple(points),
                                      tolerances=tolerances)
    stream = _out_stream(args)
    json.dump(report.to_dict(), stream, indent=2)
    stream.write("\n")
    if stream is not sys.stdout:
        stream.close()
    if solver_failures:
        return EXIT_SOLVER
    return EXIT_OK if report.passed else EXIT_VALIDATION


def build_parser():
    parser = _Parser(prog="wurlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, n_flag=True):
        p.add_argument("--config", help="TOML config path")
        p.add_argument("--seed", type=int, help="64-bit master seed override")
        p.add_argument("--out", help="write data here instead of stdout")
        p.add_argument("--horizon", type=float, help="queue-mode seconds")
        p.add_argument("--rounds", type=int, help="round-mode round count")
        if n_flag:
            p.add_argument("--n", type=int, help="cluster size override")

    p = sub.add_parser("defaults", help="dump the effective configuration")
    common(p, n_flag=False)
    p.set_defaults(func=cmd_defaults)

    p = sub.add_parser("analytic", help="closed-form metrics for one point")
    common(p)
    p.add_argument("--scheme", required=True)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("sweep", help="CSV over (scheme, N, engine)")
    common(p, n_flag=False)
    p.add_argument("--schemes", default="all")
    p.add_argument("--n-values", default="5..100")
    p.add_argument("--engines", default="analytic")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="round-mode simulation summary")
    common(p)
    p.add_argument("--scheme", required=True)
    p.add_argument("--event-log", help="write tab-separated event trace here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="analytic vs simulation cross-check")
    common(p, n_flag=False)
    p.add_argument("--schemes", default="CCA,CSMA_CA,ADP")
    p.add_argument("--n-values", default="5,25,50,100")
    p.add_argument("--engines", default="analytic,queue_sim")
    p.add_argument("--alpha-tol", type=float, default=0.05)
    p.add_argument("--p-loss-tol", type=float, default=0.05)
    p.add_argument("--gamma-tol", type=float, default=0.07)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except analytic.SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
