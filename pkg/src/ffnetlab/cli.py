"""Command-line experiment runner.

Every output starts with a header carrying the version and the full
configuration, so a file can be regenerated from itself.  Exit codes: 0 ok,
2 usage, 3 infeasible instance, 4 I/O or parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .errors import MTooLarge, NotFeasible, ZeroBlock

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _range(text: str) -> list[int]:
    """'a:b' (inclusive), 'a:step:b', or 'a,b,c'."""
    try:
        if "," in text:
            return [int(x) for x in text.split(",")]
        parts = [int(x) for x in text.split(":")]
    except ValueError:
        raise UsageError(f"bad range {text!r}")
    if len(parts) == 1:
        return parts
    if len(parts) == 2:
        return list(range(parts[0], parts[1] + 1))
    if len(parts) == 3 and parts[1] > 0:
        return list(range(parts[0], parts[2] + 1, parts[1]))
    raise UsageError(f"bad range {text!r}")


def _frange(text: str) -> list[float]:
    try:
        if "," in text:
            return [float(x) for x in text.split(",")]
        parts = [float(x) for x in text.split(":")]
    except ValueError:
        raise UsageError(f"bad range {text!r}")
    if len(parts) == 3 and parts[1] > 0:
        n = int(math.floor((parts[2] - parts[0]) / parts[1] + 1e-9)) + 1
        return [parts[0] + i * parts[1] for i in range(n)]
    if len(parts) == 1:
        return parts
    raise UsageError(f"bad range {text!r}")


def _header(args, command: str) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "jobs")}
    return {"tool": "ffnetlab", "version": __version__, "command": command, "config": cfg}


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, tuple):
        return list(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)


def _emit(args, command: str, rows: list[dict] | None = None, doc: dict | None = None) -> None:
    header = _header(args, command)
    fmt = getattr(args, "format", None) or ("json" if doc is not None else "csv")
    buf = io.StringIO()
    if fmt == "json" or doc is not None and rows is None:
        out = {"header": header}
        if doc is not None:
            out.update(doc)
        if rows is not None:
            out["rows"] = rows
        buf.write(json.dumps(out, indent=1, default=_jsonable, sort_keys=False))
        buf.write("\n")
    else:
        buf.write("# " + json.dumps(header, default=_jsonable, sort_keys=True) + "\n")
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: _cell(v) for k, v in r.items()})
    text = buf.getvalue()
    if args.out and args.out != "-":
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(str(x) for x in v)
    return v


# --- subcommands -------------------------------------------------------------------------

def cmd_feasibility(args) -> int:
    from . import feasibility as fz
    from .and_222 import Model

    if args.table == "landau":
        ms = _range(args.m_range) if args.m_range else list(range(2, 11))
        try:
            rows = [{"m": m, "max_lcm": fz.landau_max_lcm(m), "m_factorial": math.factorial(m)} for m in ms]
        except MTooLarge as e:
            raise UsageError(str(e))
        _emit(args, "feasibility", rows)
        return EXIT_OK
    if args.table == "limits":
        t = fz.limit_table()
        rows = [{"model": f"P_{k}", "p_to_inf": t[k]["p_to_inf"], "m_to_inf": t[k]["m_to_inf"]} for k in ("FE", "SE", "MIMO")]
        _emit(args, "feasibility", rows)
        return EXIT_OK
    if args.p is None or args.m_range is None:
        raise UsageError("--p and --m-range are required unless --table is given")
    if args.table == "curve":
        _emit(args, "feasibility", fz.feasibility_curve(args.p, _range(args.m_range)))
        return EXIT_OK
    model = Model.parse(args.model)
    rows = []
    for m in _range(args.m_range):
        cf, fid, bounds, flags = fz.closed_form(model, args.p, m, args.entrywise)
        row = {"model": args.model, "p": args.p, "m": m, "formula": fid,
               "closed_form": str(cf) if isinstance(cf, Fraction) else repr(float(cf)),
               "closed_form_float": float(cf),
               "bound_lo": bounds[0] if bounds else "", "bound_hi": bounds[1] if bounds else ""}
        if model.value == "ExtensionField":
            row["p_fe_single_hop"] = str(fz.p_fe_single_hop(args.p, m))
        if args.trials > 0:
            rep = fz.mc_feasibility(model, args.p, m, args.trials, args.seed, args.shards, args.jobs, args.entrywise)
            row.update({"mc_estimate": rep.mc_estimate, "mc_trials": rep.mc_trials, "mc_seed": args.seed,
                        "ci95": rep.ci95, "within": rep.within, "scheme_estimate": rep.scheme_estimate})
        row["flags"] = ";".join(flags)
        rows.append(row)
    _emit(args, "feasibility", rows)
    return EXIT_OK


def _parse_msgs(text: str | None, W, n: int, rng) -> list:
    if text is None or text == "random":
        return [W.random_elem(rng) for _ in range(n)]
    items = [s.strip() for s in text.split(";") if s.strip()]
    if len(items) != n:
        raise UsageError(f"expected {n} message symbols, got {len(items)}")
    return [W(s) for s in items]


def _load_json(path: str) -> dict:
    """Read a JSON file; a bare name that is not on disk falls back to the bundled fixtures."""
    if not _exists(path) and "/" not in path:
        from importlib import resources

        res = resources.files("ffnetlab.fixtures").joinpath(path)
        text = res.read_text() if res.is_file() else None
    else:
        text = None
    if text is None:
        with open(path) as f:
            text = f.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}:{e.lineno}:{e.colno}: {e.msg}")


class ParseError(Exception):
    pass


def cmd_simulate_222(args) -> int:
    from .and_222 import ChannelInstance222, build_plan, check_feasible, simulate_222

    doc = _load_json(args.instance)
    try:
        ch = ChannelInstance222.from_json(doc)
    except (KeyError, ValueError, TypeError) as e:
        raise ParseError(f"{args.instance}: {e}")
    ok, pred = check_feasible(ch)
    if not ok:
        _emit(args, "simulate-222", doc={"success": False, "error": f"NotFeasible:{pred}"})
        print(f"NotFeasible:{pred}", file=sys.stderr)
        return EXIT_INFEASIBLE
    try:
        plan = build_plan(ch, seed=args.seed)
    except NotFeasible as e:
        _emit(args, "simulate-222", doc={"success": False, "error": f"NotFeasible:{e.predicate}"})
        print(f"NotFeasible:{e.predicate}", file=sys.stderr)
        return EXIT_INFEASIBLE
    W = plan.ext_ctx if plan.r > 1 else ch.ctx
    rng = np.random.default_rng(args.seed)
    w1 = _parse_msgs(args.w1 if args.messages != "random" else None, W, ch.m, rng)
    w2 = _parse_msgs(args.w2 if args.messages != "random" else None, W, ch.m - 1, rng)
    res = simulate_222(ch, w1, w2, seed=args.seed, trace=args.trace, plan=plan)
    out = {"success": res["success"], "plan": plan.summary(),
           "w1": [str(x) for x in w1], "w2": [str(x) for x in w2],
           "w1_hat": res["w1_hat"].render(), "w2_hat": res["w2_hat"].render() if res["w2_hat"] is not None else None}
    if args.trace:
        out["trace"] = res["trace"]
    _emit(args, "simulate-222", doc=out)
    return EXIT_OK if res["success"] else 1


def cmd_simulate_3user(args) -> int:
    from .ia_3user import ChannelInstance3U, default_plan, rank_conditions, simulate_3user, infeasibility_reason

    doc = _load_json(args.instance)
    try:
        ch = ChannelInstance3U.from_json(doc)
    except (KeyError, ValueError, TypeError) as e:
        raise ParseError(f"{args.instance}: {e}")
    try:
        plan = default_plan(ch, seed=args.seed)
        if not rank_conditions(plan, ch)["feasible"]:
            raise NotFeasible(infeasibility_reason(ch))
    except NotFeasible as e:
        _emit(args, "simulate-3user", doc={"success": False, "error": f"NotFeasible:{e.predicate}"})
        print(f"NotFeasible:{e.predicate}", file=sys.stderr)
        return EXIT_INFEASIBLE
    W = plan.ext_ctx if plan.r > 1 else ch.ctx
    rng = np.random.default_rng(args.seed)
    h = ch.m // 2
    ws = [_parse_msgs(None, W, h, rng) for _ in range(3)]
    res = simulate_3user(ch, *ws, seed=args.seed, plan=plan)
    out = {"success": res["success"], "plan": plan.summary(),
           "messages": [[str(x) for x in w] for w in ws],
           "decoded": [d.render() for d in res["decoded"]]}
    _emit(args, "simulate-3user", doc=out)
    return EXIT_OK if res["success"] else 1


def cmd_wired(args) -> int:
    from .feasibility import p_fe, p_se
    from .wired_rlnc import Topology, load_fixture, throughput_latency, wired_trials

    path = args.topology
    if path.endswith(".json") and not _exists(path):
        name = path.rsplit("/", 1)[-1]
        try:
            topo = load_fixture(name)
        except FileNotFoundError:
            raise FileNotFoundError(path)
    elif not path.endswith(".json"):
        topo = load_fixture(path)
    else:
        doc = _load_json(path)
        try:
            topo = Topology.from_json(doc)
        except (KeyError, ValueError, TypeError) as e:
            raise ParseError(f"{path}: {e}")
    if len(topo.flows) != 2:
        raise UsageError("the wired runner drives two-flow topologies")
    counts = wired_trials(topo, args.mode, args.p, args.m, args.trials, args.seed, jobs=args.jobs)
    tl = throughput_latency(args.p, args.m, args.R0)
    ref = p_fe(args.p, args.m) if args.mode == "vector" else p_se(args.p, args.m)
    row = {"topology": path, "mode": args.mode, "p": args.p, "m": args.m, "trials": args.trials, "seed": args.seed}
    row.update({k: counts[k] for k in ("feasible", "zero_block", "infeasible", "success",
                                       "feasibility_frequency", "success_frequency")})
    row.update({"reference_probability": float(ref), "reference_is_approximate": True,
                "R0": float(args.R0), "latency_T": tl["latency_T"], "throughput": tl["throughput"],
                "expected_throughput": tl["throughput"] * counts["success_frequency"]})
    _emit(args, "wired", [row])
    return EXIT_OK


def _exists(path: str) -> bool:
    import os

    return os.path.exists(path)


def cmd_gaussian(args) -> int:
    from .gaussian_rates import DEFAULT_SNR_DB, ergodic_sweep, sweep_rows

    snrs = _frange(args.snr_db) if args.snr_db else list(DEFAULT_SNR_DB)
    res = ergodic_sweep(snrs, trials=args.trials, seed=args.seed, bound=args.bound, jobs=args.jobs)
    _emit(args, "gaussian", sweep_rows(res))
    return EXIT_OK


# --- parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ffnetlab", description="Finite-field network alignment experiments.")
    ap.add_argument("--version", action="version", version=f"ffnetlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, fmt="csv"):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes (does not change results)")
        p.add_argument("--format", choices=("csv", "json"), default=fmt)

    f = sub.add_parser("feasibility", help="closed forms and Monte Carlo feasibility; tables")
    f.add_argument("--model", choices=("fe", "se", "mimo"), default="fe")
    f.add_argument("--p", type=int)
    f.add_argument("--m-range", dest="m_range")
    f.add_argument("--trials", type=int, default=0)
    f.add_argument("--shards", type=int, default=1)
    f.add_argument("--entrywise", action="store_true", help="MIMO: uniform entries instead of uniform GL")
    f.add_argument("--table", choices=("landau", "limits", "curve"))
    common(f)
    f.set_defaults(func=cmd_feasibility)

    s = sub.add_parser("simulate-222", help="AND on a 2x2x2 instance file")
    s.add_argument("--instance", required=True)
    s.add_argument("--messages", choices=("random", "given"), default="random")
    s.add_argument("--w1", help="m symbols separated by ';' (with --messages given)")
    s.add_argument("--w2", help="m-1 symbols separated by ';'")
    s.add_argument("--trace", action="store_true")
    common(s, "json")
    s.set_defaults(func=cmd_simulate_222)

    t = sub.add_parser("simulate-3user", help="eigenvector IA on a 3-user instance file")
    t.add_argument("--instance", required=True)
    t.add_argument("--messages", choices=("random",), default="random")
    common(t, "json")
    t.set_defaults(func=cmd_simulate_3user)

    w = sub.add_parser("wired", help="two-flow wired network with RLNC and AND")
    w.add_argument("--topology", required=True, help="JSON path or bundled fixture name")
    w.add_argument("--mode", choices=("scalar", "vector"), default="vector")
    w.add_argument("--p", type=int, required=True)
    w.add_argument("--m", type=int, required=True)
    w.add_argument("--trials", type=int, default=1000)
    w.add_argument("--R0", type=float, default=1.0, help="link capacity in bits per unit time")
    common(w)
    w.set_defaults(func=cmd_wired)

    g = sub.add_parser("gaussian", help="ergodic sum rates of CoF-AND, PCoF-CIA and TDMA")
    g.add_argument("--snr-db", dest="snr_db", help="'a:step:b' or comma list")
    g.add_argument("--trials", type=int, default=200)
    g.add_argument("--bound", type=int, default=3)
    common(g)
    g.set_defaults(func=cmd_gaussian)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_IO
    except (OSError, FileNotFoundError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (NotFeasible, ZeroBlock) as e:
        print(f"{type(e).__name__}:{getattr(e, 'predicate', e)}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
