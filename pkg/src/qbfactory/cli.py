"""Command-line front end: ``qbf {construct,coin,cost,fidelity,check}``.

Exit codes: 0 on success, 2 for invalid configuration or expressions,
3 for bad input data or numerical failures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import coin as coins
from .construct import compile_plan
from .errors import ConfigError, ExprSyntaxError, QbfError, SynthesisError, UnknownSymbolError
from .fidelity import fidelity_report, measured_table, read_truth_table_csv, simulate_truth_table
from .state import CNOT
from .sweep import COST_HEADER, HEADER, RunConfig, chunk_rng, emit_report, render_report, run_cost, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _clean(obj):
    """Make a structure strict-JSON safe (nan/inf become null)."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if not math.isfinite(x) else float(format(x, ".12g"))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _config(args, name):
    return RunConfig(
        subcommand=name,
        p_start=args.p_start,
        p_stop=args.p_stop,
        p_step=args.p_step,
        shots=args.shots,
        seed=args.seed,
        loss_survival=args.loss,
        output_path=args.out,
        format=args.format,
        workers=args.workers,
        eps_c=args.eps_c,
    ).validate()


def _cmd_construct(args):
    if not args.expr:
        raise ConfigError("construct needs --expr")
    cfg = _config(args, "construct")
    plan, _ = compile_plan(args.expr)
    rows = run_sweep(cfg, "expr", expr=args.expr)
    if cfg.format == "json":
        doc = {"expression": args.expr, "plan": plan.to_dict(), "rows": rows}
        _write(json.dumps(_clean(doc), indent=2) + "\n", cfg.output_path)
    else:
        if cfg.output_path is not None:
            sys.stdout.write(plan.to_json() + "\n")
        _write(render_report(rows, "csv", HEADER), cfg.output_path)


def _cmd_coin(args):
    cfg = _config(args, "coin")
    if args.expr:
        rows = run_sweep(cfg, "expr", expr=args.expr)
    else:
        rows = run_sweep(cfg, args.coin)
    text = emit_report(rows, cfg.format, cfg.output_path, HEADER)
    if cfg.output_path is None:
        sys.stdout.write(text)


def _cmd_cost(args):
    cfg = _config(args, "cost")
    rows = run_cost(cfg)
    text = render_report(rows, cfg.format, COST_HEADER)
    _write(text, cfg.output_path)


def _cmd_fidelity(args):
    cfg = _config(args, "fidelity")
    if args.simulate:
        if not 0.0 <= args.noise <= 1.0:
            raise ConfigError("--noise must lie in [0, 1]")
        hv = simulate_truth_table(CNOT, args.noise, cfg.shots, "HV", chunk_rng(cfg.seed, "fidelity", 0, 0))
        da = simulate_truth_table(CNOT, args.noise, cfg.shots, "DA", chunk_rng(cfg.seed, "fidelity", 1, 0))
    else:
        hv = read_truth_table_csv(args.table_hv, "HV") if args.table_hv else measured_table("HV")
        da = read_truth_table_csv(args.table_da, "DA") if args.table_da else measured_table("DA")
    report = fidelity_report(hv, da)
    if cfg.format == "json":
        doc = dict(report)
        doc["counts_hv"] = hv.counts.tolist()
        doc["counts_da"] = da.counts.tolist()
        _write(json.dumps(_clean(doc), indent=2) + "\n", cfg.output_path)
    else:
        _write(render_report([_clean(report)], "csv"), cfg.output_path)


def _coin_function(args):
    if args.expr:
        from .construct import synthesize_single
        from .coin import coin_from_state

        res = synthesize_single(args.expr, None)
        return coin_from_state(res.state, [0, 1], [0], name=args.expr)
    name = args.coin
    if name == "fc":
        return coins.f_c_coin()
    if name in ("g1", "g2", "g3"):
        return coins.g_coin()
    if name == "wedge":
        return coins.f_wedge_coin()
    if name.startswith("fa:") or name.startswith("const:"):
        try:
            a = float(name.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad coin spec {name!r}") from exc
        if not 0.0 <= a <= 1.0:
            raise ConfigError("coin parameter must lie in [0, 1]")
        return coins.f_a_coin(a) if name.startswith("fa:") else coins.constant_coin(a)
    raise ConfigError(f"unknown coin {name!r}")


def _cmd_check(args):
    if args.format not in ("csv", "json"):
        raise ConfigError(f"unknown format {args.format!r}")
    f = coins.extend_common_zeros(_coin_function(args))
    cbf = coins.cbf_check(f)
    spb = coins.spb_check(f)
    doc = {"coin": f.name, "cbf": cbf.to_dict(), "spb": spb.to_dict()}
    if args.format == "json":
        _write(json.dumps(_clean(doc), indent=2) + "\n", args.out)
    else:
        row = {
            "coin": f.name,
            "cbf": "pass" if cbf.passes else "fail",
            "cbf_min": cbf.minimum,
            "cbf_max": cbf.maximum,
            "spb": spb.status,
            "spb_reason": spb.failure_reason,
        }
        lines = ["coin,cbf,cbf_min,cbf_max,spb,spb_reason"]
        lines.append(",".join(v if isinstance(v, str) else format(v, ".12g") for v in row.values()))
        _write("\n".join(lines) + "\n", args.out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p-start", type=float, default=0.0)
    common.add_argument("--p-stop", type=float, default=1.0)
    common.add_argument("--p-step", type=float, default=0.1)
    common.add_argument("--shots", type=int, default=10_000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--loss", type=float, default=1.0, help="per-attempt survival probability")
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--format", default="csv", choices=("csv", "json"))
    common.add_argument("--expr", default=None, help="amplitude expression over p and s")
    common.add_argument("--coin", default="fc", help="fc, g1, g2, g3 or fa:<a>")
    common.add_argument("--eps-c", type=float, default=0.0221)
    common.add_argument("--workers", type=int, default=1)

    parser = argparse.ArgumentParser(prog="qbf", description="Quantum-to-classical Bernoulli factory toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("construct", parents=[common], help="synthesize a state from an expression")
    sub.add_parser("coin", parents=[common], help="sweep a coin over a p grid")
    sub.add_parser("cost", parents=[common], help="quantum against classical coin consumption")
    fid = sub.add_parser("fidelity", parents=[common], help="truth-table fidelities")
    fid.add_argument("--table-hv", default=None)
    fid.add_argument("--table-da", default=None)
    fid.add_argument("--simulate", action="store_true")
    fid.add_argument("--noise", type=float, default=0.0)
    sub.add_parser("check", parents=[common], help="feasibility verdicts for a coin function")
    return parser


COMMANDS = {
    "construct": _cmd_construct,
    "coin": _cmd_coin,
    "cost": _cmd_cost,
    "fidelity": _cmd_fidelity,
    "check": _cmd_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (ConfigError, ExprSyntaxError, UnknownSymbolError, SynthesisError) as exc:
        print(f"qbf: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QbfError, ValueError, ZeroDivisionError) as exc:
        print(f"qbf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"qbf: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
