"""Locators, rewriting rules, systems, and the one-step semantics."""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional

from .errors import AlphabetError, BoundViolation, PreconditionError
from .logic import TRUE, atoms, is_positive
from .patterns import (
    WILDCARD,
    PNode,
    Query,
    QueryRef,
    TreePattern,
    Var,
    eval_formula,
    eval_query,
    flatten,
    instantiate,
    is_matching,
    iter_matchings,
    pnode,
    tnode,
    valuation,
)
from .trees import DataTree, Dtd, depth, dtd_check, exceeds_simple_path, canonical_key

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Locator:
    base: TreePattern
    appends: Mapping[int, str] = field(default_factory=dict, hash=False)
    renames: Mapping[int, str] = field(default_factory=dict, hash=False)
    dels: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "appends", dict(self.appends))
        object.__setattr__(self, "renames", dict(self.renames))
        object.__setattr__(self, "dels", frozenset(self.dels))
        base = self.base
        for v in list(self.appends) + list(self.renames):
            lab = base.labels[v]
            if not (isinstance(lab, str) or lab is WILDCARD):
                raise ValueError(f"append/ren on non-tag locator node {v}")
        if self.dels & (set(self.appends) | set(self.renames)):
            raise ValueError("a del node cannot also be renamed or appended to")
        for v in self.dels:
            for c in base.children[v]:
                if c not in self.dels:
                    raise ValueError("del must be downward closed in the locator")

    @classmethod
    def from_pnode(cls, root: PNode, cond=TRUE) -> "Locator":
        """Build from annotated nodes (``del``, ``ren``, ``append``, ``self``);
        ``del`` is propagated to descendants."""
        base, annots = flatten(root, cond)
        appends, renames, dels = {}, {}, set()
        for i, ann in enumerate(annots):
            unknown = set(ann) - {"del", "ren", "append"}
            if unknown:
                raise ValueError(f"unknown annotation(s) {sorted(unknown)}")
            if ann.get("append"):
                appends[i] = ann["append"]
            if ann.get("ren"):
                renames[i] = ann["ren"]
            if ann.get("del") or (i and base.parents[i] in dels):
                dels.add(i)
        return cls(base, appends, renames, frozenset(dels))

    @property
    def self_node(self) -> int:
        return 0 if self.base.self_node is None else self.base.self_node

    @cached_property
    def free_base(self) -> TreePattern:
        return dataclasses.replace(self.base, self_node=None)

    @property
    def top_dels(self) -> list[int]:
        return sorted(v for v in self.dels if self.base.parents[v] not in self.dels)

    def annotations(self, v: int) -> dict:
        ann = {}
        if v == self.base.self_node:
            ann["self"] = True
        if v in self.dels:
            ann["del"] = True
        if v in self.renames:
            ann["ren"] = self.renames[v]
        if v in self.appends:
            ann["append"] = self.appends[v]
        return ann


@dataclass(frozen=True)
class Rule:
    name: str
    locator: Locator
    guard: object = TRUE
    queries: Mapping[str, Query] = field(default_factory=dict, hash=False)
    forests: Mapping[str, tuple] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "queries", dict(self.queries))
        object.__setattr__(self, "forests", {k: tuple(v) for k, v in self.forests.items()})
        for v, fname in self.locator.appends.items():
            if fname not in self.forests:
                raise ValueError(f"rule {self.name}: append names unknown forest {fname!r}")
        for fname, forest in self.forests.items():
            for tr in forest:
                for q in tr.query_refs():
                    if q not in self.queries:
                        raise ValueError(f"rule {self.name}: forest {fname} uses unknown query {q!r}")

    @cached_property
    def new_variables(self) -> tuple:
        """Forest variables not bound by the locator, in name order."""
        fv = set()
        for forest in self.forests.values():
            for tr in forest:
                fv |= tr.variables()
        return tuple(sorted(fv - self.locator.base.variables))

    def size_measure(self):
        """(|L|, |G|, max |Q_i|) as used by the predecessor size bound."""
        g = sum(len(p) for p in atoms(self.guard))
        q = max((q.size() for q in self.queries.values()), default=1)
        return len(self.locator.base), g, q


@dataclass(frozen=True)
class InitSpec:
    """Explicit initial trees, or a symbolic DTD + formula with a size cap."""

    trees: tuple = ()
    dtd: Optional[Dtd] = None
    formula: object = TRUE
    cap: Optional[int] = None

    @property
    def symbolic(self) -> bool:
        return self.dtd is not None


@dataclass(frozen=True)
class System:
    name: str
    alphabet: tuple
    rules: tuple
    dtd: Dtd
    invariant: object = TRUE
    depth_bound: Optional[int] = None
    path_bound: Optional[int] = None
    init: InitSpec = InitSpec()

    def rule(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def satisfies_invariant(self, t: DataTree) -> bool:
        return dtd_check(t, self.dtd) and eval_formula(self.invariant, t)

    @property
    def positive(self) -> bool:
        return (
            self.dtd.positive
            and self.dtd.non_recursive
            and is_positive(self.invariant)
            and all(is_positive(r.guard) for r in self.rules)
        )

    def within_bounds(self, t: DataTree) -> bool:
        if self.depth_bound is not None and depth(t) > self.depth_bound:
            return False
        if self.path_bound is not None and exceeds_simple_path(t, self.path_bound):
            return False
        return True


@dataclass(frozen=True)
class StepWitness:
    rule: str
    matching: tuple
    valuation: Mapping[str, int] = field(hash=False)
    result: DataTree = None
    source: DataTree = None
    # source node of each result node, -1 for appended nodes
    origin: tuple = field(default=(), compare=False, repr=False)

    def replay(self, sys: "System") -> DataTree:
        return apply(sys.rule(self.rule), self.source, self.matching)

    def to_record(self, rule: Rule) -> dict:
        base = rule.locator.base
        return {
            "rule": self.rule,
            "matching": {str(i): list(self.source.path_to(v)) for i, v in enumerate(self.matching)},
            "pattern": [_label_text(lab) for lab in base.labels],
            "valuation": dict(sorted(self.valuation.items())),
        }


def _label_text(lab) -> str:
    if isinstance(lab, str):
        return lab
    if isinstance(lab, int):
        return f"@{lab}"
    return repr(lab)


class _DisabledMatch(PreconditionError):
    pass


def _fresh_values(rule: Rule, t: DataTree) -> dict:
    used = t.values()
    out = {}
    nxt = 0
    for name in rule.new_variables:
        while nxt in used:
            nxt += 1
        out[name] = nxt
        nxt += 1
    return out


def apply_step(rule: Rule, t: DataTree, mu: tuple) -> StepWitness:
    loc = rule.locator
    base = loc.base
    mu = tuple(mu)
    if not is_matching(loc.free_base, t, mu, injective=True):
        raise PreconditionError(f"rule {rule.name}: not an injective matching satisfying cond")
    deleted: set = set()
    for d in loc.top_dels:
        v = mu[d]
        if v == 0:
            raise _DisabledMatch(f"rule {rule.name}: deletes the root")
        deleted.update(range(v, v + t.sizes[v]))
    for a in list(loc.appends) + list(loc.renames):
        if mu[a] in deleted:
            raise _DisabledMatch(f"rule {rule.name}: append/rename target inside a deleted subtree")
    values = valuation(base, t, mu)
    values.update(_fresh_values(rule, t))
    anchor = mu[loc.self_node]
    qres = {name: eval_query(q, t, anchor) for name, q in rule.queries.items()}
    inst: dict = {}
    for fname in set(loc.appends.values()):
        trees: list[DataTree] = []
        for tn in rule.forests[fname]:
            trees.extend(instantiate(tn, values, qres))
        inst[fname] = trees
    renamed = {mu[v]: tag for v, tag in loc.renames.items()}
    appended = {mu[v]: inst[f] for v, f in loc.appends.items()}
    labels: list = []
    parents: list = []
    origin: list = []

    def copy(tr: DataTree, parent: int):
        off = len(labels)
        labels.extend(tr.labels)
        parents.extend(parent if p == -1 else p + off for p in tr.parents)
        origin.extend([-1] * len(tr.labels))

    def emit(v, parent):
        if v in deleted:
            return
        i = len(labels)
        labels.append(renamed.get(v, t.labels[v]))
        parents.append(parent)
        origin.append(v)
        for c in t.children[v]:
            emit(c, i)
        for tr in appended.get(v, ()):
            copy(tr, i)

    emit(0, -1)
    result = DataTree(labels, parents)
    return StepWitness(rule.name, mu, values, result, t, tuple(origin))


def apply(rule: Rule, t: DataTree, mu: tuple) -> DataTree:
    return apply_step(rule, t, mu).result


def enabled(rule: Rule, t: DataTree, sys: Optional[System] = None) -> list[StepWitness]:
    """Applicable steps of ``rule`` on ``t``; with ``sys`` results must
    satisfy its static invariant."""
    loc = rule.locator
    out = []
    for mu in iter_matchings(loc.free_base, t, injective=True):
        if not eval_formula(rule.guard, t, mu[loc.self_node]):
            continue
        try:
            w = apply_step(rule, t, mu)
        except _DisabledMatch as exc:
            log.debug("skipping matching %s: %s", mu, exc)
            continue
        if sys is not None and not sys.satisfies_invariant(w.result):
            continue
        out.append(w)
    return out


def succ(sys: System, t: DataTree, bounds: str = "raise") -> list[tuple]:
    """One successor per equivalence class, as ``(witness, tree)`` pairs.

    ``bounds`` is ``"raise"`` (default), ``"drop"`` or ``"ignore"`` and says
    what happens to results beyond the declared depth/simple-path bounds.
    """
    seen: dict = {}
    for rule in sys.rules:
        for w in enabled(rule, t, sys):
            key = canonical_key(w.result)
            if key in seen:
                continue
            if bounds != "ignore" and not sys.within_bounds(w.result):
                if bounds == "raise":
                    raise BoundViolation(
                        f"successor via {rule.name} exceeds the declared bounds", w.result
                    )
                continue
            seen[key] = (w, w.result)
    return list(seen.values())


# GAXML call / return -------------------------------------------------------

def _check_tags(alphabet, tags):
    if alphabet is None:
        return
    missing = [t for t in tags if t not in alphabet]
    if missing:
        raise AlphabetError(f"tags missing from the alphabet: {missing}")


def compile_gaxml_call(f: str, arg_query: Query, call_guard=TRUE, alphabet=None,
                       query_name: str = "arg") -> Rule:
    """Service invocation: rename ``!f`` to ``?f`` under a fresh call id
    and write ``f(arguments, id)`` into the workspace."""
    _check_tags(alphabet, ["!" + f, "?" + f, "WS", f])
    root = pnode(
        WILDCARD,
        pnode("!" + f, desc=True, self=True, ren="?" + f, append="T_X"),
        pnode("WS", append="T_f"),
    )
    forests = {
        "T_f": (tnode(f, tnode(QueryRef(query_name)), tnode(Var("X"))),),
        "T_X": (tnode(Var("X")),),
    }
    return Rule(f"call-{f}", Locator.from_pnode(root), call_guard, {query_name: arg_query}, forests)


def compile_gaxml_return(f: str, ret_query: Query, ret_guard=TRUE, alphabet=None,
                         query_name: str = "ret") -> Rule:
    """Service return: append the return query's result next to ``?f``,
    clear the workspace entry and the call id, rename back to ``!f``."""
    from .patterns import Eq

    _check_tags(alphabet, ["!" + f, "?" + f, "WS", f])
    root = pnode(
        WILDCARD,
        pnode(WILDCARD, pnode("?" + f, pnode(Var("X"), **{"del": True}), self=True, ren="!" + f),
              desc=True, append="T_Q"),
        pnode("WS", pnode(f, pnode(Var("Y")), **{"del": True})),
    )
    loc = Locator.from_pnode(root, Eq("X", "Y"))
    forests = {"T_Q": (tnode(QueryRef(query_name)),)}
    return Rule(f"return-{f}", loc, ret_guard, {query_name: ret_query}, forests)
