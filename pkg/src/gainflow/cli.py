"""Command-line driver: generate traces, replay algorithms, Monte-Carlo checks.

    gainflow gen --kind random --n 40 --m 4 --seed 7 --out trace.jsonl
    gainflow gen --kind adversary --levels 1 --period 2 --out lb.jsonl
    gainflow run --algo simple --trace trace.jsonl --eps 1.0 --seed 3 \
                 --out metrics.jsonl --summary summary.json
    gainflow run --algo bmatch --trace bmatch.jsonl --eps 0.5
    gainflow mc-claim2 --f 0.3 --f-prime 0.7 --draws 100000
    gainflow mc-loglog --trace trace.jsonl --seeds 16

Exit status is 1 when --strict is set and a guaranteed bound fails.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import adversary, harness
from .errors import BoundViolation, Infeasible
from .traces import gen_random_unrelated, gen_restricted


def _cmd_gen(args):
    if args.kind == "random":
        trace = gen_random_unrelated(args.n, args.m, args.seed,
                                     (args.p_min, args.p_max))
    elif args.kind == "restricted":
        trace = gen_restricted(args.n, args.m, args.seed, (args.p_min, args.p_max))
    else:
        trace = adversary.build_trace(args.levels, args.period)
    text = trace.serialize()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_run(args):
    kind, payload = harness.load_any(args.trace)
    if args.algo == "bmatch":
        if kind != "bmatch":
            print("bmatch needs a b-matching input file", file=sys.stderr)
            return 2
        arrivals, caps = payload
        records, total = harness.bmatch_run(arrivals, caps, args.eps)
        ok = all(harness.bmatch_capacity_ok(r["matched_counts"], caps, args.eps)
                 for r in records)
        summary = {"algo": "bmatch", "total_cost": total,
                   "sum_costs": sum(a.cost for a in arrivals),
                   "bound": (1 + args.eps) / args.eps * sum(a.cost for a in arrivals),
                   "capacities_ok": ok}
        _emit(args, [json.dumps(r, sort_keys=True, default=str) for r in records], summary)
        if args.strict and (not ok or total > summary["bound"] + 1e-6):
            return 1
        return 0
    if kind != "trace":
        print("this algorithm needs an event trace", file=sys.stderr)
        return 2
    config = harness.RunConfig(algo=args.algo, eps=args.eps, seed=args.seed,
                               t_star_mode=args.tstar, strict=args.strict,
                               mark_c=args.mark_c)
    try:
        rows, summary = harness.run(payload, config)
    except BoundViolation as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        return 1
    except Infeasible as exc:
        print(f"cannot replay this trace: {exc}", file=sys.stderr)
        return 2
    _emit(args, [r.to_json() for r in rows], summary)
    return 0


def _emit(args, lines, summary):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))
    else:
        for ln in lines:
            print(ln)
    text = json.dumps(summary, sort_keys=True)
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_mc_claim2(args):
    report = harness.mc_offset_recovery(args.f, args.f_prime, args.draws, args.seed)
    print(json.dumps(report, sort_keys=True))
    return 0 if report["ok"] else 1


def _cmd_mc_loglog(args):
    kind, trace = harness.load_any(args.trace)
    if kind != "trace":
        print("mc-loglog needs an event trace", file=sys.stderr)
        return 2
    report = harness.mc_loglog(trace, seeds=range(args.seeds), eps=args.eps,
                               mark_c=args.mark_c, workers=args.workers)
    print(json.dumps(report, sort_keys=True))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="gainflow", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a trace")
    g.add_argument("--kind", choices=("random", "restricted", "adversary"),
                   default="random")
    g.add_argument("--n", type=int, default=20)
    g.add_argument("--m", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--p-min", type=float, default=1.0)
    g.add_argument("--p-max", type=float, default=10.0)
    g.add_argument("--levels", type=int, default=1)
    g.add_argument("--period", type=int, default=2)
    g.add_argument("--out")
    g.set_defaults(func=_cmd_gen)

    r = sub.add_parser("run", help="replay a trace through an algorithm")
    r.add_argument("--algo", choices=harness.ALGORITHMS, default="fractional")
    r.add_argument("--eps", type=float, default=0.5)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--trace", required=True)
    r.add_argument("--tstar", choices=("known", "auto"), default="known")
    r.add_argument("--mark-c", type=float, default=10.0)
    r.add_argument("--out")
    r.add_argument("--summary")
    r.add_argument("--strict", action="store_true")
    r.set_defaults(func=_cmd_run)

    c2 = sub.add_parser("mc-claim2", help="offset-capacity recovery Monte-Carlo")
    c2.add_argument("--f", type=float, required=True)
    c2.add_argument("--f-prime", type=float, required=True)
    c2.add_argument("--draws", type=int, default=100_000)
    c2.add_argument("--seed", type=int, default=0)
    c2.set_defaults(func=_cmd_mc_claim2)

    ml = sub.add_parser("mc-loglog", help="loglog recourse across master seeds")
    ml.add_argument("--trace", required=True)
    ml.add_argument("--seeds", type=int, default=10)
    ml.add_argument("--eps", type=float, default=1.0)
    ml.add_argument("--mark-c", type=float, default=10.0)
    ml.add_argument("--workers", type=int, default=1)
    ml.set_defaults(func=_cmd_mc_loglog)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
