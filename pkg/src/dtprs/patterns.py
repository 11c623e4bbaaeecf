"""Data tree patterns, pattern formulas, matchings and queries."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional

from .errors import UsageError
from .logic import TRUE, atoms, evaluate
from .trees import DataTree, is_data


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self):
        return f"${self.name}"


class _Wildcard:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "*"

    def __reduce__(self):
        return (_Wildcard, ())


WILDCARD = _Wildcard()
CHILD = "child"
DESC = "desc"


@dataclass(frozen=True)
class Eq:
    left: str
    right: str


@dataclass(frozen=True)
class Neq:
    left: str
    right: str


@dataclass(frozen=True)
class TreePattern:
    """Pattern nodes are numbered in preorder; ``edges[0]`` is ``None``.

    Leaves sharing a variable name must bind equal values.
    """

    labels: tuple
    parents: tuple
    edges: tuple
    cond: object = TRUE
    self_node: Optional[int] = None

    def __post_init__(self):
        n = len(self.labels)
        if n == 0 or len(self.parents) != n or len(self.edges) != n:
            raise ValueError("malformed pattern")
        if self.parents[0] != -1:
            raise ValueError("node 0 must be the pattern root")
        stack = [0]
        for i in range(1, n):
            while stack and stack[-1] != self.parents[i]:
                stack.pop()
            if not stack:
                raise ValueError("pattern nodes must be in preorder")
            stack.append(i)
            if self.edges[i] not in (CHILD, DESC):
                raise ValueError(f"bad edge kind {self.edges[i]!r}")
        for i, lab in enumerate(self.labels):
            inner = bool(self.children[i])
            if inner and not (isinstance(lab, str) or lab is WILDCARD):
                raise ValueError(f"internal pattern node {i} must carry a tag or *")
            if not (isinstance(lab, (str, Var)) or lab is WILDCARD or is_data(lab)):
                raise ValueError(f"bad pattern label {lab!r}")
        names = self.variables
        for at in atoms(self.cond):
            if at.left not in names or at.right not in names:
                raise ValueError(f"condition mentions unbound variable in {at}")
        if self.self_node is not None and not 0 <= self.self_node < n:
            raise ValueError("self node out of range")

    @cached_property
    def children(self) -> tuple:
        kids: list[list[int]] = [[] for _ in self.labels]
        for i in range(1, len(self.labels)):
            kids[self.parents[i]].append(i)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def variables(self) -> frozenset:
        return frozenset(lab.name for lab in self.labels if isinstance(lab, Var))

    @property
    def relative(self) -> bool:
        return self.self_node is not None

    def __len__(self):
        return len(self.labels)


@dataclass
class PNode:
    """Mutable nested builder node used by the parser and by tests."""

    label: object
    children: list = field(default_factory=list)
    desc: bool = False
    annots: dict = field(default_factory=dict)


def pnode(label, *children, desc=False, **annots) -> PNode:
    return PNode(label, list(children), desc, annots)


def flatten(root: PNode, cond=TRUE) -> tuple[TreePattern, list[dict]]:
    """Number a nested pattern in preorder; returns the pattern and the
    per-node annotation dicts."""
    labels, parents, edges, annots = [], [], [], []
    self_node = None

    def walk(node, parent):
        nonlocal self_node
        i = len(labels)
        labels.append(node.label)
        parents.append(parent)
        edges.append(None if parent == -1 else (DESC if node.desc else CHILD))
        ann = dict(node.annots)
        if ann.pop("self", False):
            if self_node is not None:
                raise ValueError("pattern has two self nodes")
            self_node = i
        annots.append(ann)
        for c in node.children:
            walk(c, i)

    walk(root, -1)
    return TreePattern(tuple(labels), tuple(parents), tuple(edges), cond, self_node), annots


def build_pattern(root: PNode, cond=TRUE) -> TreePattern:
    pat, annots = flatten(root, cond)
    if any(annots):
        raise ValueError("only locators carry action annotations")
    return pat


# matching -----------------------------------------------------------------

def _label_ok(plab, t: DataTree, v: int) -> bool:
    lab = t.labels[v]
    if plab is WILDCARD:
        return not is_data(lab)
    if isinstance(plab, Var):
        return is_data(lab)
    if is_data(plab):
        return is_data(lab) and lab == plab
    return lab == plab


def cond_holds(cond, valuation) -> bool:
    return evaluate(
        cond,
        lambda at: (valuation[at.left] == valuation[at.right]) == isinstance(at, Eq),
    )


def iter_matchings(
    p: TreePattern, t: DataTree, anchor: Optional[int] = None, injective: bool = False
) -> Iterator[tuple]:
    """Matchings as tuples indexed by pattern node, in lexicographic order.

    A relative pattern needs ``anchor``; a plain pattern ignores it.
    """
    if p.self_node is not None and anchor is None:
        raise UsageError("relative pattern matched without an anchor node")
    n = len(p)
    img = [-1] * n
    used: set = set()
    val: dict = {}
    labels, parents, edges, self_node = p.labels, p.parents, p.edges, p.self_node

    def rec(i):
        if i == n:
            if cond_holds(p.cond, val):
                yield tuple(img)
            return
        par = parents[i]
        if par == -1:
            cands = (0,)
        elif edges[i] == CHILD:
            cands = t.children[img[par]]
        else:
            cands = t.descendants(img[par])
        if i == self_node:
            cands = (anchor,) if anchor in cands else ()
        plab = labels[i]
        for v in cands:
            if injective and v in used:
                continue
            if not _label_ok(plab, t, v):
                continue
            bound_here = False
            if isinstance(plab, Var):
                have = val.get(plab.name)
                if have is None:
                    val[plab.name] = t.labels[v]
                    bound_here = True
                elif have != t.labels[v]:
                    continue
            img[i] = v
            used.add(v)
            yield from rec(i + 1)
            used.discard(v)
            if bound_here:
                del val[plab.name]

    yield from rec(0)


def match_all(p, t, anchor=None) -> list[tuple]:
    return list(iter_matchings(p, t, anchor))


def match_injective(p, t, anchor=None) -> list[tuple]:
    return list(iter_matchings(p, t, anchor, injective=True))


def matches(p, t, anchor=None) -> bool:
    return next(iter_matchings(p, t, anchor), None) is not None


def valuation(p: TreePattern, t: DataTree, m: tuple) -> dict:
    return {lab.name: t.labels[m[i]] for i, lab in enumerate(p.labels) if isinstance(lab, Var)}


def eval_formula(f, t: DataTree, anchor: Optional[int] = None) -> bool:
    def atom(p):
        if p.relative and anchor is None:
            raise UsageError("relative pattern in formula but no anchor given")
        return matches(p, t, anchor if p.relative else None)

    return evaluate(f, atom)


def formula_relative(f) -> bool:
    return any(p.relative for p in atoms(f))


# templates and queries ----------------------------------------------------

@dataclass(frozen=True)
class QueryRef:
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class TNode:
    """Template node of a query head or a rule forest."""

    label: object
    children: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if self.children and not isinstance(self.label, str):
            raise ValueError("template inner nodes must be tags")

    def iter_nodes(self):
        yield self
        for c in self.children:
            yield from c.iter_nodes()

    def variables(self) -> set:
        return {n.label.name for n in self.iter_nodes() if isinstance(n.label, Var)}

    def query_refs(self) -> set:
        return {n.label.name for n in self.iter_nodes() if isinstance(n.label, QueryRef)}

    def size(self) -> int:
        return sum(1 for _ in self.iter_nodes())


def tnode(label, *children) -> TNode:
    return TNode(label, tuple(children))


def instantiate(node: TNode, values: dict, query_results: dict | None = None) -> list[DataTree]:
    lab = node.label
    if isinstance(lab, QueryRef):
        return list(query_results[lab.name])
    if isinstance(lab, Var):
        return [DataTree.build(values[lab.name])]
    if is_data(lab):
        return [DataTree.build(lab)]
    kids: list[DataTree] = []
    for c in node.children:
        kids.extend(instantiate(c, values, query_results))
    return [DataTree.build(lab, kids)]


@dataclass(frozen=True)
class Query:
    body: TreePattern
    head: TNode

    def __post_init__(self):
        hv = self.head.variables()
        if not hv:
            raise ValueError("query head needs at least one variable")
        missing = hv - self.body.variables
        if missing:
            raise ValueError(f"head variables {sorted(missing)} not bound by the body")
        if self.head.query_refs():
            raise ValueError("query heads cannot reference queries")

    def size(self) -> int:
        return len(self.body) + self.head.size()


def eval_query(q: Query, t: DataTree, anchor: Optional[int] = None) -> list[DataTree]:
    """Distinct instantiations of the head, sorted by exact tree key."""
    seen: dict = {}
    for m in iter_matchings(q.body, t, anchor):
        for tr in instantiate(q.head, valuation(q.body, t, m)):
            seen.setdefault(tr.key(), tr)
    return [seen[k] for k in sorted(seen)]


def is_matching(p: TreePattern, t: DataTree, m: tuple, anchor=None, injective=False) -> bool:
    """Check a proposed matching directly against the definition."""
    if len(m) != len(p) or m[0] != 0:
        return False
    if any(not 0 <= v < len(t) for v in m):
        return False
    if injective and len(set(m)) != len(m):
        return False
    if p.self_node is not None and anchor is not None and m[p.self_node] != anchor:
        return False
    val: dict = {}
    for i, plab in enumerate(p.labels):
        v = m[i]
        if not _label_ok(plab, t, v):
            return False
        if i:
            pv = m[p.parents[i]]
            if p.edges[i] == CHILD and t.parents[v] != pv:
                return False
            if p.edges[i] == DESC and not t.is_ancestor(pv, v):
                return False
        if isinstance(plab, Var):
            if val.setdefault(plab.name, t.labels[v]) != t.labels[v]:
                return False
    return cond_holds(p.cond, val)
