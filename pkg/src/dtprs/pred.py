"""Predecessor bases for positive systems.

Two procedures compute the minimal trees ``t1`` satisfying the invariant
whose one-step successors cover a target tree:

* ``method="construct"`` glues the locator, a guard clause, an invariant
  clause, the surviving part of the target and query witnesses onto a root,
  then repairs DTD and invariant violations before and after the step.
  Every candidate is checked exactly, so results are always sound.
* ``method="enumerate"`` walks all trees up to the size cap.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from .errors import PreconditionError
from .logic import dnf
from .order import embeds
from .patterns import (
    CHILD,
    WILDCARD,
    QueryRef,
    TreePattern,
    Var,
    cond_holds,
    eval_formula,
    matches,
)
from .rewrite import Rule, System, _DisabledMatch, apply_step, succ
from .trees import DOM, DataTree, canonical_key, dtd_check, dtd_depth_bound, dtd_violations, is_data

log = logging.getLogger(__name__)


# drafts ----------------------------------------------------------------------

@dataclass(frozen=True)
class Draft:
    """A tree under construction; node ids are creation order, not preorder."""

    labels: tuple
    parents: tuple
    mu: tuple = ()
    rule: Optional[Rule] = None

    def add(self, label, parent: int) -> tuple["Draft", int]:
        return (
            Draft(self.labels + (label,), self.parents + (parent,), self.mu, self.rule),
            len(self.labels),
        )

    def __len__(self):
        return len(self.labels)

    def children(self, v: int) -> list[int]:
        return [c for c, p in enumerate(self.parents) if p == v]

    def subtree(self, v: int) -> list[int]:
        out = [v]
        i = 0
        while i < len(out):
            out.extend(self.children(out[i]))
            i += 1
        return out

    def depth(self, v: int) -> int:
        d = 0
        while self.parents[v] != -1:
            v = self.parents[v]
            d += 1
        return d

    def values(self) -> set:
        return {lab for lab in self.labels if is_data(lab)}

    def fresh(self) -> int:
        return max(self.values(), default=-1) + 1

    def to_tree(self) -> tuple[DataTree, list[int]]:
        """Preorder tree plus the map from draft ids to tree ids."""
        order: list[int] = []
        kids: dict[int, list[int]] = {}
        for c, p in enumerate(self.parents):
            kids.setdefault(p, []).append(c)
        stack = [0]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(reversed(kids.get(v, ())))
        pos = [0] * len(self.labels)
        for i, v in enumerate(order):
            pos[v] = i
        labels = [self.labels[v] for v in order]
        parents = [-1 if self.parents[v] == -1 else pos[self.parents[v]] for v in order]
        return DataTree(labels, parents), pos

    # locator-derived views
    def deleted(self) -> set:
        out: set = set()
        if self.rule is not None:
            for d in self.rule.locator.top_dels:
                out.update(self.subtree(self.mu[d]))
        return out

    def effective(self, v: int):
        if self.rule is not None:
            for x, tag in self.rule.locator.renames.items():
                if self.mu[x] == v:
                    return tag
        return self.labels[v]

    def append_targets(self) -> set:
        if self.rule is None:
            return set()
        return {self.mu[x] for x in self.rule.locator.appends}

    def hosts(self, w: int) -> set:
        """Root labels of trees appended at ``w``; ``None`` stands for a data leaf."""
        out: set = set()
        if self.rule is None:
            return out
        for x, fname in self.rule.locator.appends.items():
            if self.mu[x] != w:
                continue
            for tn in self.rule.forests[fname]:
                lab = tn.label
                if isinstance(lab, QueryRef):
                    lab = self.rule.queries[lab.name].head.label
                out.add(lab if isinstance(lab, str) else None)
        return out

    @property
    def anchor(self) -> Optional[int]:
        if self.rule is None:
            return None
        return self.mu[self.rule.locator.self_node]

    def key(self):
        """Canonical key that also records the locator image."""
        labels = list(self.labels)
        parents = list(self.parents)
        if self.rule is not None:
            marks: dict[int, list[str]] = {}
            for x, v in enumerate(self.mu):
                marks.setdefault(v, []).append(str(x))
            for v, ms in marks.items():
                tag = "\x00" + ",".join(sorted(ms, key=int))
                if is_data(labels[v]):
                    # wrap the data leaf so that the mark survives
                    labels.append(labels[v])
                    parents.append(v)
                    labels[v] = tag
                else:
                    labels[v] = f"{labels[v]}{tag}"
        tree, _ = Draft(tuple(labels), tuple(parents)).to_tree()
        return (self.rule.name if self.rule else None, canonical_key(tree))


@dataclass
class Budget:
    """Shared limits for one construction.

    Gluing is bounded by pattern sizes and depth; the size cap only stops
    the repair loop, which is where unbounded growth can happen.
    """

    cap: int
    depth: int
    alphabet: tuple
    candidates: int = 0
    # drafts above a known tree are pruned: they cannot add a minimal element
    dominated: Optional[Callable[[DataTree], bool]] = None
    # drafts abandoned at the size cap, by canonical key
    cuts: dict = field(default_factory=dict)

    def room(self, d: Draft, extra: int = 1) -> bool:
        if len(d) + extra > self.cap:
            tree = d.to_tree()[0]
            self.cuts.setdefault(canonical_key(tree), tree)
            return False
        return True

    def capped_by(self, found: list) -> bool:
        """True if some abandoned draft is not already above a found tree.

        Drafts only grow, so a draft above a found tree cannot lead to a
        new minimal element.
        """
        return any(
            not any(embeds(b, cut) is not None for b in found) for cut in self.cuts.values()
        )


# gluing patterns ------------------------------------------------------------

def _values_for(d: Draft) -> list[int]:
    return sorted(d.values()) + [d.fresh()]


def _new_node_labels(plab, d: Draft, val: dict, budget: Budget) -> list:
    if plab is WILDCARD:
        return list(budget.alphabet)
    if isinstance(plab, Var):
        if plab.name in val:
            return [val[plab.name]]
        return _values_for(d)
    return [plab]


def _fits(plab, d: Draft, v: int, val: dict) -> bool:
    lab = d.labels[v]
    if plab is WILDCARD:
        return not is_data(lab)
    if isinstance(plab, Var):
        return is_data(lab) and val.get(plab.name, lab) == lab
    if is_data(plab):
        return lab == plab
    return lab == plab


def _attach_points(d: Draft, w: int, edge: str, budget: Budget) -> Iterator[tuple[Draft, int]]:
    """Parents for a new node that must sit below ``w``.

    A descendant edge may hang the node under any tag node of the subtree of
    ``w``, optionally through a chain of new tag nodes.
    """
    if edge == CHILD:
        yield d, w
        return
    for u in d.subtree(w):
        if is_data(d.labels[u]):
            continue
        yield from _chains(d, u, budget)


def _chains(d: Draft, u: int, budget: Budget) -> Iterator[tuple[Draft, int]]:
    yield d, u
    if d.depth(u) + 2 > budget.depth:
        return
    for tag in budget.alphabet:
        d2, c = d.add(tag, u)
        yield from _chains(d2, c, budget)


def glue(
    d: Draft,
    p: TreePattern,
    budget: Budget,
    anchor: Optional[int] = None,
    injective: bool = False,
) -> Iterator[tuple[Draft, tuple, dict]]:
    """All minimal extensions of ``d`` on which ``p`` matches, with the matching.

    Each pattern node maps to an existing node or to a new one.
    """
    n = len(p)
    self_node = p.self_node

    def rec(i, d: Draft, img: tuple, val: dict):
        if i == n:
            if cond_holds(p.cond, val):
                yield d, img, val
            return
        plab = p.labels[i]
        par = p.parents[i]
        if par == -1:
            if (self_node == 0 and anchor != 0) or not _fits(plab, d, 0, val):
                return
            yield from rec(i + 1, d, (0,), _bind(plab, d, 0, val))
            return
        w = img[par]
        if p.edges[i] == CHILD:
            cands = d.children(w)
        else:
            cands = d.subtree(w)[1:]
        if i == self_node:
            cands = [anchor] if anchor in cands else []
        for v in cands:
            if injective and v in img:
                continue
            if _fits(plab, d, v, val):
                yield from rec(i + 1, d, img + (v,), _bind(plab, d, v, val))
        if i == self_node:
            return
        for d1, u in _attach_points(d, w, p.edges[i], budget):
            if d1.depth(u) + 1 > budget.depth:
                continue
            for lab in _new_node_labels(plab, d1, val, budget):
                d2, v = d1.add(lab, u)
                yield from rec(i + 1, d2, img + (v,), _bind(plab, d2, v, val))

    yield from rec(0, d, (), {})


def _bind(plab, d: Draft, v: int, val: dict) -> dict:
    if isinstance(plab, Var) and plab.name not in val:
        val = dict(val)
        val[plab.name] = d.labels[v]
    return val


def glue_formula_clause(d: Draft, clause, budget: Budget, anchor=None) -> Iterator[Draft]:
    items = sorted(clause, key=len)

    def rec(i, d):
        if i == len(items):
            yield d
            return
        p = items[i]
        for d2, _, _ in glue(d, p, budget, anchor if p.relative else None):
            yield from rec(i + 1, d2)

    yield from rec(0, d)


def _dedup(drafts) -> Iterator[Draft]:
    seen = set()
    for d in drafts:
        k = d.key()
        if k not in seen:
            seen.add(k)
            yield d


# target placement -----------------------------------------------------------

NEW = -2


def place_target(d: Draft, t: DataTree, budget: Budget) -> Iterator[tuple[Draft, tuple]]:
    """Map ``t`` onto the post-step view of ``d``; subtrees may instead be left
    for the appended forests (marked ``NEW``)."""
    deleted = d.deleted()
    appends = d.append_targets()
    m = len(t)

    def rec(u, d: Draft, img: tuple, sigma: dict):
        if u == m:
            yield d, img
            return
        lab = t.labels[u]
        pu = t.parents[u]
        if pu == -1:
            if d.effective(0) != lab:
                return
            yield from rec(u + 1, d, (0,), sigma)
            return
        w = img[pu]
        if w == NEW:
            yield from rec(u + 1, d, img + (NEW,), sigma)
            return
        used = set(img)
        taken = set(sigma.values())
        for c in d.children(w):
            if c in used or c in deleted:
                continue
            if is_data(lab):
                have = d.labels[c]
                if not is_data(have):
                    continue
                if lab in sigma:
                    if sigma[lab] != have:
                        continue
                    yield from rec(u + 1, d, img + (c,), sigma)
                elif have not in taken:
                    yield from rec(u + 1, d, img + (c,), {**sigma, lab: have})
            elif d.effective(c) == lab:
                yield from rec(u + 1, d, img + (c,), sigma)
        if d.depth(w) + 1 <= budget.depth:
            if is_data(lab):
                if lab in sigma:
                    options = [sigma[lab]]
                else:
                    options = [x for x in _values_for(d) if x not in taken]
                for x in options:
                    d2, c = d.add(x, w)
                    yield from rec(u + 1, d2, img + (c,), {**sigma, lab: x})
            else:
                d2, c = d.add(lab, w)
                yield from rec(u + 1, d2, img + (c,), sigma)
        if w in appends and (None if is_data(lab) else lab) in d.hosts(w):
            yield from rec(u + 1, d, img + (NEW,), sigma)

    yield from rec(0, d, (), {})


# repair ---------------------------------------------------------------------

def _child_counts(labels) -> dict:
    counts: dict = {}
    for lab in labels:
        key = DOM if is_data(lab) else lab
        counts[key] = counts.get(key, 0) + 1
    return counts


def _add_children(d: Draft, v: int, clause, budget: Budget, counts: dict) -> Iterator[Draft]:
    """Add the children still missing for a clause of count atoms at ``v``,
    given the current ``counts``."""
    missing: dict[str, int] = {}
    for at in clause:
        k = at.k - counts.get(at.symbol, 0)
        if k > 0:
            missing[at.symbol] = max(missing.get(at.symbol, 0), k)
    need_dom = missing.pop(DOM, 0)
    need_tags = [tag for tag in sorted(missing) for _ in range(missing[tag])]
    total = len(need_tags) + need_dom
    if total == 0:
        return
    if d.depth(v) + 1 > budget.depth:
        return
    for tag in need_tags:
        d, _ = d.add(tag, v)

    def rec(i, d):
        if i == need_dom:
            yield d
            return
        for x in _values_for(d):
            d2, _ = d.add(x, v)
            yield from rec(i + 1, d2)

    yield from rec(0, d)


def _fix_node(d: Draft, v: int, sys: System, budget: Budget, tag=None, counts=None):
    """Branches adding children at ``v``; ``tag``/``counts`` default to the
    draft's own, and are the successor's when repairing after the step."""
    if counts is None:
        counts = _child_counts(d.labels[c] for c in d.children(v))
    for clause in dnf(sys.dtd.formula(tag or d.labels[v])):
        yield from _add_children(d, v, clause, budget, counts)


def _fix_dtd_and_invariant(d: Draft, sys: System, budget: Budget) -> Optional[Iterator[Draft]]:
    """Branches fixing one violation of the invariant on ``d``; None if it holds."""
    tree, pos = d.to_tree()
    bad = dtd_violations(tree, sys.dtd)
    if bad:
        back = {p: v for v, p in enumerate(pos)}
        return _fix_node(d, back[bad[0]], sys, budget)
    if not eval_formula(sys.invariant, tree):
        return (
            d2
            for clause in dnf(sys.invariant)
            for d2 in glue_formula_clause(d, clause, budget)
            if len(d2) > len(d)
        )
    return None


def _add_query_witness(d: Draft, budget: Budget) -> Iterator[Draft]:
    for q in d.rule.queries.values():
        for d2, _, _ in glue(d, q.body, budget, d.anchor if q.body.relative else None):
            if len(d2) > len(d):
                yield d2


def _step(d: Draft):
    tree, pos = d.to_tree()
    mu = tuple(pos[v] for v in d.mu)
    try:
        w = apply_step(d.rule, tree, mu)
    except _DisabledMatch:
        return tree, pos, None
    return tree, pos, w


def repair(d: Draft, sys: System, budget: Budget, seen: set) -> Iterator[Draft]:
    """Complete ``d`` so that it and its successor under the glued step
    satisfy the invariant."""
    if not budget.room(d, 0):
        return
    if budget.dominated is not None and budget.dominated(d.to_tree()[0]):
        return
    k = d.key()
    if k in seen:
        return
    seen.add(k)
    branches = _fix_dtd_and_invariant(d, sys, budget)
    if branches is not None:
        for d2 in branches:
            yield from repair(d2, sys, budget, seen)
        return
    if d.rule is None:
        yield d
        return
    tree, pos, w = _step(d)
    if w is None:
        return
    result = w.result
    bad = dtd_violations(result, sys.dtd)
    if bad:
        x = bad[0]
        src = w.origin[x]
        if src != -1:
            back = {p: v for v, p in enumerate(pos)}
            counts = _child_counts(result.labels[c] for c in result.children[x])
            for d2 in _fix_node(d, back[src], sys, budget, result.labels[x], counts):
                yield from repair(d2, sys, budget, seen)
        else:
            for d2 in _add_query_witness(d, budget):
                yield from repair(d2, sys, budget, seen)
        return
    if result.labels[0] not in sys.dtd.root_labels:
        return
    if not eval_formula(sys.invariant, result):
        for clause in dnf(sys.invariant):
            for d2 in glue_formula_clause(d, clause, budget):
                if len(d2) > len(d):
                    yield from repair(d2, sys, budget, seen)
        for d2 in _add_query_witness(d, budget):
            yield from repair(d2, sys, budget, seen)
        return
    yield d


# pred-basis -----------------------------------------------------------------

@dataclass
class Basis:
    """A finite antichain of trees standing for their upward closure."""

    trees: list = field(default_factory=list)
    capped: bool = False
    candidates: int = 0

    def __len__(self):
        return len(self.trees)

    def __iter__(self):
        return iter(self.trees)

    def covers(self, t: DataTree) -> bool:
        return any(embeds(b, t) is not None for b in self.trees)


def minimize(trees) -> list[DataTree]:
    """The minimal elements, one per equivalence class, smallest first."""
    out: list[DataTree] = []
    seen = set()
    for t in sorted(trees, key=len):
        k = canonical_key(t)
        if k in seen:
            continue
        seen.add(k)
        if any(embeds(b, t) is not None for b in out):
            continue
        out.append(t)
    return out


def depth_limit(sys: System) -> int:
    if sys.depth_bound is not None:
        return sys.depth_bound
    return dtd_depth_bound(sys.dtd)


def is_predecessor(sys: System, t1: DataTree, t: DataTree) -> bool:
    if not sys.satisfies_invariant(t1) or not sys.within_bounds(t1):
        return False
    return any(embeds(t, r) is not None for _, r in succ(sys, t1, bounds="drop"))


def _query_copies(d: Draft, budget: Budget, count: int) -> Iterator[Draft]:
    """Glue up to ``count`` query body witnesses."""
    yield d
    if count == 0 or not d.rule.queries:
        return
    for d2 in _dedup(_add_query_witness(d, budget)):
        yield from _query_copies(d2, budget, count - 1)


def _construct(sys: System, t: DataTree, budget: Budget) -> Iterator[DataTree]:
    for rule in sys.rules:
        loc = rule.locator
        for r0 in sorted(sys.dtd.root_labels):
            start = Draft((r0,), (-1,), (), rule)
            located = []
            for d, img, _ in glue(start, loc.free_base, budget, injective=True):
                d = Draft(d.labels, d.parents, img, rule)
                if 0 in d.deleted():
                    continue
                dead = d.deleted()
                if any(d.mu[x] in dead for x in list(loc.appends) + list(loc.renames)):
                    continue
                located.append(d)
            guarded = []
            for d in _dedup(located):
                for clause in dnf(rule.guard):
                    guarded.extend(glue_formula_clause(d, clause, budget, d.anchor))
            invariant = []
            for d in _dedup(guarded):
                for clause in dnf(sys.invariant):
                    invariant.extend(glue_formula_clause(d, clause, budget))
            placed = []
            for d in _dedup(invariant):
                for d2, img in place_target(d, t, budget):
                    placed.append((d2, sum(1 for x in img if x == NEW)))
            seen_repair: set = set()
            seen_placed: set = set()
            for d, n_new in placed:
                k = (d.key(), n_new)
                if k in seen_placed:
                    continue
                seen_placed.add(k)
                for d2 in _dedup(_query_copies(d, budget, n_new)):
                    for d3 in repair(d2, sys, budget, seen_repair):
                        budget.candidates += 1
                        yield d3.to_tree()[0]


def pred_basis(
    sys: System,
    t: DataTree,
    size_cap: int = 12,
    method: str = "construct",
    known: Optional[list] = None,
) -> Basis:
    """Minimal predecessors (satisfying the invariant) of the upward closure of ``t``.

    Trees above an element of ``known`` are left out, since they add nothing
    to a basis that already holds ``known``.
    """
    if not sys.positive:
        raise PreconditionError("pred_basis needs a positive system; use bmc instead")
    known = list(known or ())
    good: list[DataTree] = []

    def dominated(tree: DataTree) -> bool:
        return any(embeds(b, tree) is not None for b in known) or any(
            embeds(b, tree) is not None for b in good
        )

    budget = Budget(size_cap, depth_limit(sys), tuple(sys.alphabet), dominated=dominated)
    if method == "construct":
        cands = _construct(sys, t, budget)
    elif method == "enumerate":
        cands = _enumerate_candidates(sys, budget)
    else:
        raise ValueError(f"unknown method {method!r}")
    seen = set()
    for c in cands:
        k = canonical_key(c)
        if k in seen:
            continue
        seen.add(k)
        if dominated(c) or not is_predecessor(sys, c, t):
            continue
        if len(c) > size_cap:
            budget.cuts.setdefault(k, c)
        else:
            good.append(c)
    found = minimize(good)
    if method == "construct":
        capped = budget.capped_by(found + known)
    else:
        capped = size_cap < size_bound(sys, t)
    return Basis(found, capped, budget.candidates or len(seen))


def size_bound(sys: System, t: DataTree) -> int:
    """Size bound on minimal predecessors for the largest rule of ``sys``."""
    b = depth_limit(sys)
    max_count = max(1, sys.dtd.max_count)
    best = 0
    for r in sys.rules:
        loc, guard, query = r.size_measure()
        best = max(best, loc + guard + len(t) * max(1, query))
    return b * b * ((len(sys.alphabet) + 1) * max_count) ** b * best


def _enumerate_candidates(sys: System, budget: Budget) -> Iterator[DataTree]:
    from .enumerate import enumerate_trees

    for tr in enumerate_trees(sys.alphabet, budget.cap, budget.depth, sys.dtd.root_labels):
        budget.candidates += 1
        if dtd_check(tr, sys.dtd):
            yield tr


def minimal_matching_trees(sys: System, p: TreePattern, size_cap: int) -> Basis:
    """Minimal trees satisfying the invariant and matched by ``p``."""
    budget = Budget(size_cap, depth_limit(sys), tuple(sys.alphabet))
    good = []
    seen_repair: set = set()
    for r0 in sorted(sys.dtd.root_labels):
        start = Draft((r0,), (-1,))
        for d, _, _ in glue(start, p, budget):
            for d2 in repair(d, sys, budget, seen_repair):
                tr = d2.to_tree()[0]
                budget.candidates += 1
                if sys.satisfies_invariant(tr) and sys.within_bounds(tr) and matches(p, tr):
                    good.append(tr)
    found = minimize(good)
    return Basis(found, budget.capped_by(found), budget.candidates)
