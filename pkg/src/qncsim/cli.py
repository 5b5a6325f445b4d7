"""Command line entry point: ``qncsim run|frontier|verify|transcript|decode``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .graph import NetworkGraph, generate_random_network
from .harness import ExperimentConfig, emit_csv, optimize_block_length, read_csv, run_experiment, to_csv
from .qnc import edge_quantizers, generate_coefficients, simulate_qnc
from .signal import generate_sparse_messages
from .transcript import Transcript, decode_report, verify_transcript


def _cmd_run(args):
    cfg = ExperimentConfig.load(args.config)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.out is not None:
        over["output"] = args.out
    if args.workers is not None:
        over["workers"] = args.workers
    cfg = dataclasses.replace(cfg, **over)

    def progress(done, total):
        print(f"\r{done}/{total} deployments", end="", file=sys.stderr, flush=True)

    res = run_experiment(cfg, progress=None if args.quiet else progress)
    if not args.quiet:
        print(file=sys.stderr)
    path = emit_csv(res, cfg.output)
    n_fail = sum(res.failures.values())
    print(f"wrote {len(res.rows)} rows to {path}" + (f" ({n_fail} failed decodes excluded)" if n_fail else ""))
    return 0


def _cmd_frontier(args):
    frontier = optimize_block_length(read_csv(args.input))
    if args.out:
        emit_csv(frontier, args.out)
        print(f"wrote {len(frontier.rows)} frontier rows to {args.out}")
    else:
        sys.stdout.write(to_csv(frontier))
    return 0


def _cmd_verify(args):
    checks = verify_transcript(Transcript.load(args.transcript))
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else ""))
    return 0 if all(ok for _, ok, _ in checks) else 1


def _cmd_transcript(args):
    if args.graph:
        g = NetworkGraph.load(args.graph)
    else:
        g = generate_random_network(args.nodes, args.edges, seed=[args.seed, 0])
    sched = generate_coefficients(g, args.t, seed=[args.seed, 1])
    msg = generate_sparse_messages(g.n_nodes, args.k, args.q_max, seed=[args.seed, 2])
    run = simulate_qnc(g, sched, msg.x, edge_quantizers(g, args.L, args.q_max))
    tr = Transcript.from_run(run, args.L, msg.phi)
    if args.out:
        tr.save(args.out)
    else:
        sys.stdout.write(tr.to_text())
    return 0


def _cmd_decode(args):
    sys.stdout.write(decode_report(Transcript.load(args.transcript)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qncsim", description="Quantized network coding data-gathering simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="log decoder warnings")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an SNR/delay sweep and write the result CSV")
    r.add_argument("config", help="key = value config file")
    r.add_argument("--seed", type=int, help="override the config's base seed")
    r.add_argument("--out", help="override the config's output path")
    r.add_argument("--workers", type=int, help="worker processes")
    r.add_argument("-q", "--quiet", action="store_true")
    r.set_defaults(func=_cmd_run)

    f = sub.add_parser("frontier", help="reduce a result CSV to its per-group Pareto frontier")
    f.add_argument("input")
    f.add_argument("--out", help="output CSV (stdout if omitted)")
    f.set_defaults(func=_cmd_frontier)

    v = sub.add_parser("verify", help="check the invariants of a run transcript")
    v.add_argument("transcript")
    v.set_defaults(func=_cmd_verify)

    t = sub.add_parser("transcript", help="simulate one QNC run and write its transcript")
    t.add_argument("--graph", help="edge-list file; a random network is drawn if omitted")
    t.add_argument("--nodes", type=int, default=20)
    t.add_argument("--edges", type=int, default=60)
    t.add_argument("-k", type=int, default=2, help="message sparsity")
    t.add_argument("-L", type=int, default=4, help="block length")
    t.add_argument("-t", type=int, default=6, help="last timestep")
    t.add_argument("--q-max", type=float, default=1.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out")
    t.set_defaults(func=_cmd_transcript)

    d = sub.add_parser("decode", help="l1-decode a transcript and report the error")
    d.add_argument("transcript")
    d.set_defaults(func=_cmd_decode)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"qncsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
