"""Command-line front end.

Exit codes: 0 good verdict, 1 witness found, 2 inconclusive, 3 usage error,
4 parse error, 5 bound violation, 6 other failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import analysis
from .errors import BoundViolation, DtprsError, SpecError, UsageError
from .examples import example_names, example_text, gen_pcp
from .frontend import parse_pattern, parse_system, parse_tree, print_tree
from .order import dfs_decomposition, embeds, encode, simple_path_bound
from .rewrite import InitSpec, succ
from .trees import graph_of, longest_simple_path

EXIT_USAGE, EXIT_PARSE, EXIT_BOUND, EXIT_OTHER = 3, 4, 5, 6


def _read(arg: str) -> str:
    """File contents, a packaged example, or the argument itself as inline text."""
    if os.path.exists(arg):
        return Path(arg).read_text(encoding="utf-8")
    if arg in example_names():
        return example_text(arg)
    if arg.lstrip().startswith("["):
        return arg
    raise UsageError(f"no such file or packaged example: {arg}")


def _system(args):
    if not args.spec:
        raise UsageError("--spec is required")
    return parse_system(_read(args.spec))


def _init(args, s):
    if not args.init:
        return None
    return InitSpec(trees=tuple(parse_tree(_read(x)) for x in args.init))


def _start_tree(args, s):
    if args.tree:
        return parse_tree(_read(args.tree[0]))
    if s.init.symbolic or not s.init.trees:
        raise UsageError("give --tree or declare an explicit initial tree")
    return s.init.trees[0]


def _pattern(args):
    if not args.pattern:
        raise UsageError("--pattern is required")
    return parse_pattern(_read(args.pattern))


def _emit_trace(args, s, trace, start=None, out=None):
    out = out or sys.stdout
    if args.format == "json-lines":
        out.write(analysis.trace_json_lines(s, trace, start))
        return
    states = [start] if not trace and start is not None else []
    if trace:
        out.write(f"  0: {print_tree(trace[0].source, canonical=False)}\n")
    for i, w in enumerate(trace, 1):
        out.write(f"  {i}: --{w.rule}--> {print_tree(w.result, canonical=False)}\n")
    for t in states:
        out.write(f"  0: {print_tree(t, canonical=False)}\n")


def _emit_verdict(args, v: analysis.Verdict, s, out=None) -> int:
    out = out or sys.stdout
    if args.format == "json-lines":
        _emit_trace(args, s, v.trace, v.start, out)
        rec = {"verdict": v.outcome, "reason": v.reason, "stats": v.stats}
        if v.loop_start is not None:
            rec["loop_start"] = v.loop_start
        out.write(json.dumps(rec, ensure_ascii=False, default=str) + "\n")
    else:
        out.write(f"{v.outcome}" + (f": {v.reason}" if v.reason else "") + "\n")
        if v.trace or v.start is not None:
            _emit_trace(args, s, v.trace, v.start, out)
        if v.loop_start is not None:
            out.write(f"  loop: state {len(v.trace)} dominates state {v.loop_start}\n")
        for k, val in v.stats.items():
            sys.stderr.write(f"  {k}: {val}\n")
    return v.exit_code


# commands -------------------------------------------------------------------

def cmd_validate(args) -> int:
    s = _system(args)
    rep = analysis.validate(s)
    if args.format == "json-lines":
        print(json.dumps({"system": rep.name, "classification": rep.classification,
                          "depth_bound": rep.depth_bound, "path_bound": rep.path_bound,
                          "violations": rep.errors, "notes": rep.notes}, ensure_ascii=False))
    else:
        print("\n".join(rep.lines()))
    return 0 if rep.positive_eligible else 1


def cmd_simulate(args) -> int:
    s = _system(args)
    sim = analysis.simulate(s, _start_tree(args, s), args.steps, args.policy, args.seed)
    _emit_trace(args, s, sim.steps, _start_tree(args, s))
    if sim.note and args.format == "text":
        print(sim.note)
    return 0


def cmd_succ(args) -> int:
    s = _system(args)
    t = _start_tree(args, s)
    for w, r in succ(s, t):
        if args.format == "json-lines":
            rec = {"rule": w.rule}
            rec.update(w.to_record(s.rule(w.rule)))
            rec["tree"] = print_tree(r, canonical=False)
            print(json.dumps(rec, ensure_ascii=False))
        else:
            print(f"{w.rule}: {print_tree(r, canonical=False)}")
    return 0


def cmd_reach(args) -> int:
    s = _system(args)
    v = analysis.reach_backward(s, _pattern(args), size_cap=args.size_cap, init=_init(args, s))
    return _emit_verdict(args, v, s)


def cmd_bmc(args) -> int:
    s = _system(args)
    v = analysis.bmc(s, _pattern(args), init=_init(args, s), n=args.bound)
    return _emit_verdict(args, v, s)


def cmd_terminate(args) -> int:
    s = _system(args)
    v = analysis.terminate(s, _start_tree(args, s))
    return _emit_verdict(args, v, s)


def cmd_embed(args) -> int:
    if not args.tree or len(args.tree) != 2:
        raise UsageError("embed needs exactly two --tree arguments")
    t1, t2 = (parse_tree(_read(x)) for x in args.tree)
    m = embeds(t1, t2)
    if args.format == "json-lines":
        print(json.dumps({"embeds": m is not None, "mapping": list(m) if m else None}))
    elif m is None:
        print("no embedding")
    else:
        print("embeds: " + ", ".join(f"{i}->{j}" for i, j in enumerate(m)))
    return 0 if m is not None else 1


def cmd_decompose(args) -> int:
    if not args.tree:
        raise UsageError("decompose needs --tree")
    t = parse_tree(_read(args.tree[0]))
    g = graph_of(t)
    d = dfs_decomposition(g, args.bound)
    longest = longest_simple_path(g)
    enc = encode(d, g)
    rec = {"vertices": len(g), "longest_simple_path": longest, "width": d.width,
           "depth": d.depth, "bound": simple_path_bound(d.width, d.depth),
           "bags": [sorted(b) for b in d.bags], "parents": list(d.parents),
           "labels": [repr(x) for x in enc.labels]}
    if args.format == "json-lines":
        print(json.dumps(rec, ensure_ascii=False))
    else:
        for k in ("vertices", "longest_simple_path", "width", "depth", "bound"):
            print(f"{k}: {rec[k]}")
        for u, (b, p) in enumerate(zip(rec["bags"], rec["parents"])):
            print(f"  bag {u} (parent {p}): {b}")
    return 0


def _parse_pairs(text: str) -> list[tuple[str, str]]:
    pairs = []
    for item in text.replace(",", " ").split():
        if ":" not in item:
            raise UsageError(f"PCP pair must look like u:v, got {item!r}")
        u, v = item.split(":", 1)
        pairs.append((u, v))
    return pairs


def cmd_gen(args) -> int:
    out = Path(args.out) if args.out else None
    if args.what == "pcp":
        if not args.pairs:
            raise UsageError("gen pcp needs --pairs")
        files = gen_pcp(_parse_pairs(args.pairs))
        if out is None:
            sys.stdout.write(files.system)
            return 0
        out.mkdir(parents=True, exist_ok=True)
        (out / "pcp.dtprs").write_text(files.system, encoding="utf-8")
        (out / "success.dtp").write_text(files.pattern, encoding="utf-8")
        print(out / "pcp.dtprs")
        print(out / "success.dtp")
        return 0
    if out is None:
        print("\n".join(example_names()))
        return 0
    out.mkdir(parents=True, exist_ok=True)
    for name in example_names():
        (out / name).write_text(example_text(name), encoding="utf-8")
        print(out / name)
    return 0


COMMANDS = {
    "validate": cmd_validate, "simulate": cmd_simulate, "succ": cmd_succ,
    "reach": cmd_reach, "terminate": cmd_terminate, "bmc": cmd_bmc,
    "embed": cmd_embed, "decompose": cmd_decompose, "gen": cmd_gen,
}


class _Parser(argparse.ArgumentParser):
    """Reports bad arguments with the usage exit code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--spec", help="system file or packaged example name")
    common.add_argument("--tree", action="append", help="tree file or inline tree")
    common.add_argument("--pattern", help="pattern file or inline pattern")
    common.add_argument("--init", action="append", help="initial tree, replaces the declared ones")
    common.add_argument("--bound", type=int, default=None, help="bmc depth, or decomposition K")
    common.add_argument("--size-cap", type=int, default=12)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--format", choices=("text", "json-lines"), default="text")
    common.add_argument("--single-threaded", action="store_true",
                        help="accepted for scripts; all commands run on one thread")
    common.add_argument("-v", "--verbose", action="count", default=0)

    ap = _Parser(prog="dtprs", description="Data tree rewriting verifier")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "simulate":
            p.add_argument("--steps", type=int, default=10)
            p.add_argument("--policy", default="first-enabled",
                           choices=("first-enabled", "random", "exhaustive-listing"))
        if name == "gen":
            p.add_argument("what", choices=("pcp", "examples"))
            p.add_argument("--pairs", help="PCP pairs as u:v separated by spaces or commas")
            p.add_argument("--out", help="directory to write into")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "bmc" and args.bound is None:
        args.bound = 10
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpecError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except BoundViolation as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        if exc.tree is not None:
            print(print_tree(exc.tree, canonical=False), file=sys.stderr)
        return EXIT_BOUND
    except DtprsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
