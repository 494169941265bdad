"""Batch front-end: single runs, fuzz campaigns, and witness scenarios.

Machine-first output (JSON report, JSONL trace, CSV campaign summary)
with a short human table on stdout.  Exit codes are part of the
contract:

0  stop condition met (cycle found / gossip complete / witness holds)
2  budget exhausted before the stop condition
3  illegal protocol/board/schedule combination
4  internal assertion failure
5  parameter or input error
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from .harness import (
    CLEAN_SPEC,
    CYCLE,
    FuzzSpec,
    HarnessError,
    audit_move_bounds,
    detect_cycle,
    fuzz_config,
    gossip_complete,
    witness_mirror,
    witness_symmetry,
)
from .model import (
    BOARD_CLASSES,
    FW,
    ModelError,
    NW,
    PROGRAM_DFT,
    PROGRAM_FW_DFT,
    PROGRAM_PATH_ENUM,
    PROGRAMS,
    snapshot_hash,
)
from .scheduler import (
    ASYNC_RANDOM_FAIR,
    ASYNC_ROUND_ROBIN,
    ASYNC_SCRIPTED,
    FULL,
    HALF,
    SYNC,
    SchedulePolicy,
    run,
)
from .topology import GraphError, build_grid, build_ring, parse_graph, random_connected_graph

EXIT_OK = 0
EXIT_TRUNCATED = 2
EXIT_ILLEGAL = 3
EXIT_INTERNAL = 4
EXIT_PARAM = 5

SCHEDULES = (SYNC, ASYNC_RANDOM_FAIR, ASYNC_ROUND_ROBIN, ASYNC_SCRIPTED)


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_PARAM):
        super().__init__(message)
        self.code = code


def load_graph(spec: str):
    """Graph source: ring:N, grid:RxC, random:N[:EXTRA[:SEED]], or a file path."""
    try:
        if spec.startswith("ring:"):
            return build_ring(int(spec.split(":", 1)[1]))
        if spec.startswith("grid:"):
            rows, cols = spec.split(":", 1)[1].split("x")
            return build_grid(int(rows), int(cols))
        if spec.startswith("random:"):
            parts = spec.split(":")[1:]
            n = int(parts[0])
            extra = int(parts[1]) if len(parts) > 1 else 2
            seed = int(parts[2]) if len(parts) > 2 else 0
            return random_connected_graph(n, extra, seed)
        with open(spec, encoding="utf-8") as fh:
            return parse_graph(fh.read())
    except (ValueError, OSError, GraphError) as exc:
        raise CliError(f"bad graph source {spec!r}: {exc}") from exc


def check_legality(protocol: str, board: str, schedule: str, unsafe_async: bool) -> None:
    """Reject combinations the model rules out (or gate them behind a flag)."""
    if protocol not in PROGRAMS:
        raise CliError(f"unknown protocol {protocol!r}")
    if board not in BOARD_CLASSES:
        raise CliError(f"unknown board class {board!r}")
    if schedule not in SCHEDULES:
        raise CliError(f"unknown schedule {schedule!r}")
    if board == NW:
        raise CliError(f"{protocol} cannot run on NW whiteboards", EXIT_ILLEGAL)
    if protocol == PROGRAM_DFT and schedule != SYNC and not unsafe_async:
        raise CliError(
            "dft_kminus1 is synchronous-only (timer protocol); use --unsafe-async to force",
            EXIT_ILLEGAL,
        )
    if protocol in (PROGRAM_FW_DFT, PROGRAM_PATH_ENUM) and board != FW:
        raise CliError(f"{protocol} requires FW whiteboards", EXIT_ILLEGAL)


def make_policy(args) -> SchedulePolicy:
    script = ()
    if args.schedule == ASYNC_SCRIPTED:
        if not args.script:
            raise CliError("async_scripted needs --script")
        try:
            script = tuple(int(x) for x in args.script.split(","))
        except ValueError:
            raise CliError(f"bad --script {args.script!r}") from None
    return SchedulePolicy(kind=args.schedule, seed=args.seed, script=script)


def _trace_writer(path):
    fh = open(path, "w", encoding="utf-8")

    def observer(cfg, rec):
        line = {
            "step": rec.step,
            "acting": list(rec.acting),
            "moves": [
                {
                    "agent": mv.agent,
                    "from": mv.frm,
                    "via": mv.via,
                    "to": mv.to,
                    "accepted": mv.accepted,
                }
                for mv in rec.moves
            ],
            "merges": list(rec.merges),
            "hash": snapshot_hash(cfg),
        }
        fh.write(json.dumps(line, sort_keys=True) + "\n")

    return fh, observer


def _write_report(report: dict, path: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


def cmd_run(args) -> int:
    check_legality(args.protocol, args.board, args.schedule, args.unsafe_async)
    graph = load_graph(args.graph)
    policy = make_policy(args)
    cfg = fuzz_config(
        graph,
        args.k,
        FuzzSpec() if args.fuzz else CLEAN_SPEC,
        args.seed,
        board_class=args.board,
        program=args.protocol,
    )

    fh = observer = None
    if args.trace:
        fh, observer = _trace_writer(args.trace)
    try:
        if args.schedule == SYNC and args.protocol == PROGRAM_DFT:
            probe = cfg.clone()
            rep = detect_cycle(probe, args.duplex, budget=args.max_steps or None)
            bounds = audit_move_bounds(rep.records, graph)
            report = {
                "status": rep.status,
                "prefix": rep.prefix_len,
                "period": rep.period,
                "quiescent": len(rep.quiescent),
                "movers": [probe.agents[i].ident for i in rep.movers],
                "gossip_step": rep.gossip_step,
                "releases_in_cycle": rep.releases_in_cycle,
                "fwd_max": bounds.fwd_max,
                "back_max": bounds.back_max,
            }
            if observer is not None:
                steps = rep.prefix_len + rep.period if rep.status == CYCLE else rep.prefix_len
                run(cfg, policy, args.duplex, max_steps=steps, observer=observer)
            status_ok = rep.status == CYCLE
        else:
            trace = run(
                cfg,
                policy,
                args.duplex,
                stop=gossip_complete,
                max_steps=args.max_steps or 10_000,
                unsafe_async=args.unsafe_async,
                observer=observer,
            )
            report = {
                "status": trace.status,
                "steps": len(trace),
                "gossip_step": trace.stop_step,
            }
            status_ok = trace.status == "met"
    finally:
        if fh is not None:
            fh.close()
    _write_report(report, args.report)
    return EXIT_OK if status_ok else EXIT_TRUNCATED


def _fuzz_one(params: tuple) -> dict:
    (graph_spec, protocol, k, board, duplex, schedule, seed, max_steps) = params
    graph = load_graph(graph_spec)
    cfg = fuzz_config(graph, k, FuzzSpec(), seed, board_class=board, program=protocol)
    row = {
        "seed": seed,
        "status": "",
        "prefix": "",
        "period": "",
        "quiescent": "",
        "gossip_step": "",
        "fwd_max": "",
        "back_max": "",
        "ok": False,
    }
    if schedule == SYNC and protocol == PROGRAM_DFT:
        live_min = min(a.ident for a in cfg.agents)
        rep = detect_cycle(cfg, duplex, budget=max_steps or None)
        bounds = audit_move_bounds(rep.records, graph)
        movers = rep.movers
        row.update(
            status=rep.status,
            prefix=rep.prefix_len,
            period=rep.period,
            quiescent=len(rep.quiescent),
            gossip_step=rep.gossip_step if rep.gossip_step is not None else "",
            fwd_max=bounds.fwd_max,
            back_max=bounds.back_max,
            ok=(
                rep.status == CYCLE
                and len(rep.quiescent) == k - 1
                and len(movers) == 1
                and cfg.agents[movers[0]].ident == live_min
            ),
        )
    else:
        policy = SchedulePolicy(kind=schedule, seed=seed)
        budget = max_steps or 50 * graph.edge_count * k
        trace = run(cfg, policy, duplex, stop=gossip_complete, max_steps=budget)
        row.update(
            status=trace.status,
            gossip_step=trace.stop_step if trace.stop_step is not None else "",
            ok=trace.status == "met",
        )
    return row


def cmd_fuzz(args) -> int:
    check_legality(args.protocol, args.board, args.schedule, args.unsafe_async)
    load_graph(args.graph)  # validate early
    try:
        lo, hi = (int(x) for x in args.seeds.split(":"))
    except ValueError:
        raise CliError(f"bad --seeds {args.seeds!r} (want LO:HI)") from None
    params = [
        (args.graph, args.protocol, args.k, args.board, args.duplex, args.schedule, s, args.max_steps)
        for s in range(lo, hi)
    ]
    if args.jobs > 1 and params:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_fuzz_one, params))
    else:
        rows = [_fuzz_one(p) for p in params]

    columns = ["seed", "status", "prefix", "period", "quiescent", "gossip_step", "fwd_max", "back_max"]
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
            writer.writeheader()
            writer.writerows(rows)
    if args.out_jsonl:
        with open(args.out_jsonl, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    ok = sum(1 for r in rows if r["ok"])
    print(f"{ok}/{len(rows)} seeds satisfied the property set")
    return EXIT_OK if ok == len(rows) else EXIT_TRUNCATED


def cmd_witness(args) -> int:
    if args.kind == "symmetry":
        rep = witness_symmetry(args.n, args.k, args.board)
        report = {
            "kind": "symmetry",
            "n": args.n,
            "k": args.k,
            "board": args.board,
            "status": rep.status,
            "prefix": rep.prefix_len,
            "period": rep.period,
            "meetings": rep.meetings,
            "gossip_ever_complete": rep.gossip_ever_complete,
            "ok": rep.ok,
        }
        ok = rep.ok
    else:
        graph = load_graph(args.graph)
        rep = witness_mirror(graph, args.k, seed=args.seed)
        report = {
            "kind": "mirror",
            "k": args.k,
            "join_node": rep.join_node,
            "frozen_status": rep.frozen_status,
            "frozen_period": rep.frozen_period,
            "cross_tokens_exchanged": rep.cross_exchanged,
            "control_gossip_step": rep.control_gossip_step,
            "ok": rep.ok,
        }
        ok = rep.ok
    _write_report(report, args.report)
    return EXIT_OK if ok else EXIT_TRUNCATED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gossipsim")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--graph", required=True, help="ring:N | grid:RxC | random:N[:E[:S]] | file")
        p.add_argument("--protocol", default=PROGRAM_DFT, help="|".join(PROGRAMS))
        p.add_argument("--k", type=int, default=2)
        p.add_argument("--board", default="CW", help="NW|CW|FW")
        p.add_argument("--schedule", default=SYNC, help="|".join(SCHEDULES))
        p.add_argument("--duplex", default=HALF, choices=[HALF, FULL])
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-steps", type=int, default=0, help="0 = protocol default budget")
        p.add_argument("--script", default="", help="comma-separated agent indices for async_scripted")
        p.add_argument("--unsafe-async", action="store_true")
        p.add_argument("--report", default="", help="write JSON report here")

    p_run = sub.add_parser("run", help="one simulation")
    common(p_run)
    p_run.add_argument("--trace", default="", help="write JSONL trace here")
    p_run.add_argument("--fuzz", action="store_true", help="fuzz the initial configuration")
    p_run.set_defaults(fn=cmd_run)

    p_fuzz = sub.add_parser("fuzz", help="seed campaign")
    common(p_fuzz)
    p_fuzz.add_argument("--seeds", default="0:100", help="LO:HI half-open range")
    p_fuzz.add_argument("--jobs", type=int, default=1)
    p_fuzz.add_argument("--out", default="", help="summary CSV path")
    p_fuzz.add_argument("--out-jsonl", default="", help="per-seed JSON records path")
    p_fuzz.set_defaults(fn=cmd_fuzz)

    p_wit = sub.add_parser("witness", help="impossibility witnesses")
    p_wit.add_argument("kind", choices=["mirror", "symmetry"])
    p_wit.add_argument("--graph", default="ring:4")
    p_wit.add_argument("--n", type=int, default=6)
    p_wit.add_argument("--k", type=int, default=2)
    p_wit.add_argument("--board", default="CW")
    p_wit.add_argument("--seed", type=int, default=0)
    p_wit.add_argument("--report", default="")
    p_wit.set_defaults(fn=cmd_witness)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (HarnessError, ModelError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except AssertionError as exc:  # pragma: no cover - internal bug surface
        print(f"internal assertion failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
