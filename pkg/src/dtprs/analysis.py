"""Verification procedures: backward reachability, termination, bounded
model checking, plus validation and simulation."""
from __future__ import annotations

import json
import logging
import random
import time
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .errors import PreconditionError, RecursiveDtdError, UsageError
from .logic import atoms, is_positive
from .order import embeds
from .patterns import TreePattern, eval_formula, matches
from .pred import Basis, depth_limit, minimal_matching_trees, pred_basis
from .rewrite import InitSpec, StepWitness, System, apply, enabled, succ
from .trees import DataTree, canonical_key, dtd_check, dtd_depth_bound, is_data

log = logging.getLogger(__name__)

REACHABLE = "REACHABLE"
UNREACHABLE = "UNREACHABLE"
TERMINATES = "TERMINATES"
NONTERMINATING = "NONTERMINATING"
INCONCLUSIVE = "INCONCLUSIVE"

EXIT_CODES = {UNREACHABLE: 0, TERMINATES: 0, REACHABLE: 1, NONTERMINATING: 1, INCONCLUSIVE: 2}


@dataclass
class Verdict:
    outcome: str
    trace: list = field(default_factory=list)
    # NONTERMINATING: index into trace of the state dominated by the last one
    loop_start: Optional[int] = None
    reason: str = ""
    stats: dict = field(default_factory=dict)
    basis: Optional[list] = None
    # initial tree of the witness (needed when the trace is empty)
    start: Optional[DataTree] = None

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.outcome]

    def states(self) -> list[DataTree]:
        """Trees along the trace, starting with the initial one."""
        if not self.trace:
            return [] if self.start is None else [self.start]
        return [self.trace[0].source] + [w.result for w in self.trace]


# validation -----------------------------------------------------------------

@dataclass
class Report:
    name: str
    depth_bound: Optional[int] = None
    path_bound: Optional[int] = None
    errors: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def positive_eligible(self) -> bool:
        return not self.errors

    @property
    def classification(self) -> str:
        return "positive-eligible" if self.positive_eligible else "forward-only"

    def lines(self) -> list[str]:
        out = [f"system {self.name}: {self.classification}"]
        if self.depth_bound is not None:
            out.append(f"depth bound B = {self.depth_bound}")
        out += [f"violation: {e}" for e in self.errors]
        out += [f"note: {n}" for n in self.notes]
        return out


def _has_constants(f) -> bool:
    return any(any(is_data(lab) for lab in p.labels) for p in atoms(f))


def validate(sys: System) -> Report:
    rep = Report(sys.name, path_bound=sys.path_bound)
    try:
        rep.depth_bound = dtd_depth_bound(sys.dtd)
    except RecursiveDtdError as exc:
        rep.errors.append(f"DTD is recursive ({' -> '.join(exc.cycle)})")
    if sys.depth_bound is not None and rep.depth_bound is not None \
            and sys.depth_bound < rep.depth_bound:
        rep.notes.append(
            f"declared depth bound {sys.depth_bound} is below the DTD bound {rep.depth_bound}"
        )
    if not sys.dtd.positive:
        rep.errors.append("DTD uses negation")
    if not is_positive(sys.invariant):
        rep.errors.append("invariant uses negation")
    for r in sys.rules:
        if not is_positive(r.guard):
            rep.errors.append(f"guard of rule {r.name} uses negation")
    if sys.path_bound is None:
        rep.errors.append("no simple-path bound declared: the system is not simple-path "
                          "bounded, use bmc or simulate")
    else:
        rep.notes.append(f"simple-path bound K = {sys.path_bound} is enforced at run time "
                         "(it cannot be checked statically)")
    if sys.depth_bound is None and rep.depth_bound is not None:
        rep.notes.append("no depth bound declared; the DTD bound is used")
    consts = [r.name for r in sys.rules
              if _has_constants(r.guard) or any(is_data(lab) for lab in r.locator.base.labels)]
    if _has_constants(sys.invariant):
        consts.append("invariant")
    if consts:
        rep.notes.append("data constants in " + ", ".join(consts)
                         + " break invariance under data renaming")
    return rep


def require_positive(sys: System, what: str):
    rep = validate(sys)
    if not rep.positive_eligible:
        raise UsageError(f"{what} needs a positive system ({'; '.join(rep.errors)}); "
                         "use bmc for forward exploration")


# initial trees ----------------------------------------------------------------

def init_trees(sys: System, init: Optional[InitSpec] = None) -> Iterator[DataTree]:
    """Explicit initial trees, or the symbolic ones up to the cap."""
    init = init or sys.init
    if not init.symbolic:
        for t in init.trees:
            if not sys.satisfies_invariant(t):
                raise PreconditionError("initial tree violates the invariant", t)
            yield t
        return
    if init.cap is None:
        raise UsageError("a symbolic initial set needs a size cap")
    from .enumerate import enumerate_trees

    for t in enumerate_trees(sys.alphabet, init.cap, depth_limit(sys), init.dtd.root_labels):
        if dtd_check(t, init.dtd) and eval_formula(init.formula, t) \
                and sys.satisfies_invariant(t):
            yield t


def _trace_to(parents: dict, key) -> list[StepWitness]:
    out = []
    while parents[key] is not None:
        w, key = parents[key]
        out.append(w)
    out.reverse()
    return out


# bounded model checking -----------------------------------------------------

def bmc(sys: System, p: TreePattern, init: Optional[InitSpec] = None, n: int = 10,
        guide: Optional[Basis] = None) -> Verdict:
    """Breadth-first search for a tree matched by ``p`` within ``n`` steps."""
    start = time.perf_counter()
    parents: dict = {}
    frontier = []
    for t in init_trees(sys, init):
        k = canonical_key(t)
        if k not in parents:
            parents[k] = None
            frontier.append((k, t))
    explored = 0
    stats = {"states": 0, "depth": 0}
    for depth in range(n + 1):
        nxt = []
        for k, t in frontier:
            explored += 1
            if matches(p, t):
                stats.update(states=explored, depth=depth, seconds=time.perf_counter() - start)
                trace = _trace_to(parents, k)
                first = trace[0].source if trace else t
                return Verdict(REACHABLE, trace, stats=stats, start=first)
            if depth == n:
                continue
            for w, r in succ(sys, t, bounds="ignore"):
                k2 = canonical_key(r)
                if k2 in parents:
                    continue
                if guide is not None and not guide.covers(r):
                    continue
                parents[k2] = (w, k)
                nxt.append((k2, r))
        if depth == n:
            break
        if not nxt:
            stats.update(states=explored, depth=depth, seconds=time.perf_counter() - start)
            return Verdict(UNREACHABLE, reason=f"state space exhausted after {depth} steps",
                           stats=stats)
        frontier = nxt
    stats.update(states=explored, depth=n, seconds=time.perf_counter() - start)
    return Verdict(INCONCLUSIVE, reason=f"bound {n} reached", stats=stats)


# backward reachability ------------------------------------------------------

def _add_to_antichain(basis: list, t: DataTree) -> bool:
    if any(embeds(b, t) is not None for b in basis):
        return False
    basis[:] = [b for b in basis if embeds(t, b) is None]
    basis.append(t)
    return True


def reach_backward(sys: System, p: TreePattern, size_cap: int = 12,
                   init: Optional[InitSpec] = None, max_rounds: Optional[int] = None) -> Verdict:
    """Decide whether some initial tree reaches a tree matched by ``p``."""
    require_positive(sys, "reach_backward")
    start = time.perf_counter()
    init = init or sys.init
    inits = list(init_trees(sys, init))
    first = minimal_matching_trees(sys, p, size_cap)
    capped = first.capped
    basis = list(first.trees)
    stats = {"rounds": 0, "basis_sizes": [len(basis)], "pred_calls": 0}

    def hit():
        return [t for t in inits if any(embeds(b, t) is not None for b in basis)]

    frontier = list(basis)
    rounds = 0
    found = hit()
    while frontier and not found:
        if max_rounds is not None and rounds >= max_rounds:
            capped = True
            break
        rounds += 1
        new = []
        for b in frontier:
            pb = pred_basis(sys, b, size_cap, known=basis)
            stats["pred_calls"] += 1
            capped |= pb.capped
            for t in pb:
                if _add_to_antichain(basis, t):
                    new.append(t)
        frontier = [t for t in new if any(t is b for b in basis)]
        stats["basis_sizes"].append(len(basis))
        log.info("round %d: %d new, basis %d", rounds, len(frontier), len(basis))
        found = hit()
    stats.update(rounds=rounds, basis=len(basis), seconds=time.perf_counter() - start)
    if found:
        guide = Basis(basis)
        fwd = bmc(sys, p, InitSpec(tuple(found)), n=10 ** 6, guide=guide)
        if fwd.outcome != REACHABLE:
            raise AssertionError("backward analysis found a witness the forward search missed")
        stats["trace_length"] = len(fwd.trace)
        return Verdict(REACHABLE, fwd.trace, stats=stats, basis=basis, start=fwd.start)
    if init.symbolic:
        return Verdict(INCONCLUSIVE, reason=f"symbolic initial trees enumerated only up to "
                       f"{init.cap} nodes", stats=stats, basis=basis)
    if capped:
        return Verdict(INCONCLUSIVE, reason=f"predecessor construction hit the size cap "
                       f"{size_cap}", stats=stats, basis=basis)
    return Verdict(UNREACHABLE, stats=stats, basis=basis)


# termination ----------------------------------------------------------------

def terminate(sys: System, t0: DataTree) -> Verdict:
    """Depth-first reachability tree from ``t0``; a branch closes when a
    state embeds into a later state on the same branch."""
    require_positive(sys, "terminate")
    if not sys.satisfies_invariant(t0):
        raise PreconditionError("start tree violates the invariant", t0)
    start = time.perf_counter()
    done: set = set()  # states whose whole reachability tree is finite
    explored = 0
    # each frame: state, key, step into it, pending successors
    path: list = []

    def push(t, w):
        nonlocal explored
        explored += 1
        path.append([t, canonical_key(t), w, None])

    push(t0, None)
    while path:
        frame = path[-1]
        if frame[3] is None:
            frame[3] = iter(succ(sys, frame[0], bounds="raise"))
        nxt = next(frame[3], None)
        if nxt is None:
            done.add(frame[1])
            path.pop()
            continue
        w, r = nxt
        if canonical_key(r) in done:
            continue
        for i, anc in enumerate(path):
            if embeds(anc[0], r) is not None:
                trace = [f[2] for f in path[1:]] + [w]
                stats = {"states": explored, "seconds": time.perf_counter() - start}
                return Verdict(NONTERMINATING, trace, loop_start=i, stats=stats, start=t0)
        push(r, w)
    return Verdict(TERMINATES, stats={"states": explored, "seconds": time.perf_counter() - start},
                   start=t0)


def check_lasso(sys: System, v: Verdict) -> bool:
    """Replay a NONTERMINATING witness and re-apply its loop once more from the
    dominating state, each step covering the original one."""
    if v.outcome != NONTERMINATING or not replays(sys, v.trace):
        return False
    states = v.states()
    i = v.loop_start
    if embeds(states[i], states[-1]) is None:
        return False
    loop = v.trace[i:]
    cur = [states[-1]]
    for w, target in zip(loop, states[i + 1:]):
        rule = sys.rule(w.rule)
        cur = [s.result for c in cur for s in enabled(rule, c, sys)
               if embeds(target, s.result) is not None]
        if not cur:
            return False
    return True


# simulation -----------------------------------------------------------------

@dataclass
class Simulation:
    steps: list
    note: str = ""
    # exhaustive-listing: every enabled step at each visited state
    options: list = field(default_factory=list)

    @property
    def final(self) -> Optional[DataTree]:
        return self.steps[-1].result if self.steps else None


def simulate(sys: System, t0: DataTree, steps: int, policy: str = "first-enabled",
             seed: Optional[int] = None) -> Simulation:
    if not sys.satisfies_invariant(t0):
        raise PreconditionError("start tree violates the invariant", t0)
    if policy not in ("first-enabled", "random", "exhaustive-listing"):
        raise UsageError(f"unknown policy {policy!r}")
    rng = random.Random(seed)
    out = Simulation([])
    t = t0
    for _ in range(steps):
        options = [w for r in sys.rules for w in enabled(r, t, sys)]
        if policy == "exhaustive-listing":
            out.options.append(options)
        if not options:
            out.note = f"no enabled rule after {len(out.steps)} steps"
            break
        w = rng.choice(options) if policy == "random" else options[0]
        out.steps.append(w)
        t = w.result
    return out


def replays(sys: System, trace: list) -> bool:
    """Each step re-applies to its source and the sources chain up."""
    for i, w in enumerate(trace):
        if i and w.source != trace[i - 1].result:
            return False
        try:
            if apply(sys.rule(w.rule), w.source, w.matching) != w.result:
                return False
        except Exception:  # noqa: BLE001 - any failure means it does not replay
            return False
    return True


# trace output -----------------------------------------------------------------

def trace_records(sys: System, trace: list, start: Optional[DataTree] = None) -> list[dict]:
    """JSON-ready records: one for the start tree, then one per step."""
    from .frontend import print_tree

    recs = []
    first = trace[0].source if trace else start
    if first is not None:
        recs.append({"step": 0, "tree": print_tree(first, canonical=False)})
    for i, w in enumerate(trace, 1):
        rec = {"step": i}
        rec.update(w.to_record(sys.rule(w.rule)))
        rec["tree"] = print_tree(w.result, canonical=False)
        recs.append(rec)
    return recs


def trace_json_lines(sys: System, trace: list, start: Optional[DataTree] = None) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n"
                   for r in trace_records(sys, trace, start))
