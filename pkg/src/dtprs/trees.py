"""Unordered data trees, DTDs and the labeled-graph view of a tree.

A data tree stores its nodes in preorder: node 0 is the root, ``parents[i] < i``
and every subtree occupies a contiguous id range.  Tags are ``str`` labels,
data values are ``int`` labels; only leaves may carry data.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Union

from .errors import BoundViolation, RecursiveDtdError
from .logic import TRUE, atoms, evaluate, is_positive

Label = Union[str, int]


def is_data(label) -> bool:
    # bool is excluded: type(True) is bool, not int
    return type(label) is int


class DataTree:
    """Immutable rooted unordered tree labeled by tags and data values.

    Equality and hashing ignore sibling order but compare data values
    exactly; use :func:`canonical_key` for comparison up to data renaming.
    """

    __slots__ = ("labels", "parents", "children", "sizes", "_key", "_canon", "__dict__")

    def __init__(self, labels: Iterable[Label], parents: Iterable[int]):
        labels = tuple(labels)
        parents = tuple(parents)
        n = len(labels)
        if n == 0 or len(parents) != n:
            raise ValueError("a data tree needs at least a root and one parent entry per node")
        if parents[0] != -1:
            raise ValueError("node 0 must be the root")
        kids: list[list[int]] = [[] for _ in range(n)]
        stack = [0]
        for i in range(1, n):
            p = parents[i]
            while stack and stack[-1] != p:
                stack.pop()
            if not stack:
                raise ValueError("node ids must be in preorder")
            kids[p].append(i)
            stack.append(i)
        for i, lab in enumerate(labels):
            if is_data(lab):
                if kids[i]:
                    raise ValueError(f"data node {i} is not a leaf")
                if lab < 0:
                    raise ValueError("data values are natural numbers")
            elif not isinstance(lab, str) or not lab:
                raise ValueError(f"bad label {lab!r}")
        sizes = [1] * n
        for i in range(n - 1, 0, -1):
            sizes[parents[i]] += sizes[i]
        self.labels = labels
        self.parents = parents
        self.children = tuple(tuple(k) for k in kids)
        self.sizes = tuple(sizes)
        self._key = None
        self._canon = None

    # construction -------------------------------------------------------
    @classmethod
    def build(cls, label: Label, children: Iterable["DataTree"] = ()) -> "DataTree":
        labels = [label]
        parents = [-1]
        for c in children:
            off = len(labels)
            labels.extend(c.labels)
            parents.extend(-1 if p == -1 else p + off for p in c.parents)
            parents[off] = 0
        return cls(labels, parents)

    @classmethod
    def from_nested(cls, nested) -> "DataTree":
        """Build from ``int`` (data leaf), ``str`` (tag leaf) or ``(tag, [children])``."""
        if isinstance(nested, DataTree):
            return nested
        if isinstance(nested, tuple):
            label, kids = nested
            return cls.build(label, [cls.from_nested(k) for k in kids])
        return cls.build(nested)

    def to_nested(self, v: int = 0):
        if not self.children[v]:
            return self.labels[v]
        return (self.labels[v], [self.to_nested(c) for c in self.children[v]])

    # structure ----------------------------------------------------------
    def __len__(self) -> int:
        return len(self.labels)

    @property
    def root(self) -> int:
        return 0

    def descendants(self, v: int) -> range:
        """Proper descendants of ``v`` in id order."""
        return range(v + 1, v + self.sizes[v])

    def is_ancestor(self, a: int, v: int) -> bool:
        """True when ``a`` is a proper ancestor of ``v``."""
        return a < v < a + self.sizes[a]

    @cached_property
    def depths(self) -> tuple:
        d = [0] * len(self.labels)
        for i in range(1, len(d)):
            d[i] = d[self.parents[i]] + 1
        return tuple(d)

    def ancestors(self, v: int) -> list[int]:
        out = []
        p = self.parents[v]
        while p != -1:
            out.append(p)
            p = self.parents[p]
        return out

    def path_to(self, v: int) -> tuple:
        """Child positions leading from the root to ``v``."""
        steps = []
        while v:
            p = self.parents[v]
            steps.append(self.children[p].index(v))
            v = p
        return tuple(reversed(steps))

    def node_at(self, path: Iterable[int]) -> int:
        v = 0
        for i in path:
            v = self.children[v][i]
        return v

    def subtree(self, v: int) -> "DataTree":
        lo = v
        return DataTree(
            self.labels[lo:lo + self.sizes[v]],
            [-1] + [p - lo for p in self.parents[lo + 1:lo + self.sizes[v]]],
        )

    def data_leaves(self) -> list[int]:
        return [i for i, lab in enumerate(self.labels) if is_data(lab)]

    def values(self) -> set:
        return {lab for lab in self.labels if is_data(lab)}

    def rename_values(self, mapping: Mapping[int, int]) -> "DataTree":
        return DataTree(
            [mapping.get(lab, lab) if is_data(lab) else lab for lab in self.labels],
            self.parents,
        )

    # comparison ---------------------------------------------------------
    def key(self):
        if self._key is None:
            self._key = _node_keys(self, lambda v: (1, v))[0]
        return self._key

    def __eq__(self, other):
        if not isinstance(other, DataTree):
            return NotImplemented
        return len(self) == len(other) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"DataTree({self.to_nested()!r})"


def tree(label: Label, *children) -> DataTree:
    """Convenience builder: children may be trees, ints (data) or strs (tags)."""
    return DataTree.build(label, [c if isinstance(c, DataTree) else DataTree.build(c) for c in children])


def _node_keys(t: DataTree, data_key) -> list:
    keys: list = [None] * len(t)
    for v in range(len(t) - 1, -1, -1):
        lab = t.labels[v]
        if is_data(lab):
            keys[v] = data_key(lab)
        else:
            keys[v] = (0, lab, tuple(sorted(keys[c] for c in t.children[v])))
    return keys


def depth(t: DataTree) -> int:
    return max(t.depths)


# canonical form up to data renaming --------------------------------------

def canonical_key(t: DataTree):
    """Key identical for two trees iff they are equal up to a bijective
    renaming of data values.

    Values are colored by iterated refinement on their occurrence contexts;
    remaining ties are broken by individualizing each candidate in turn and
    keeping the least resulting key.
    """
    if t._canon is None:
        t._canon = _canonical(t)
    return t._canon


def _canonical(t: DataTree):
    occ: dict[int, list[int]] = {}
    for v in t.data_leaves():
        occ.setdefault(t.labels[v], []).append(v)
    if not occ:
        return t.key()
    chains = {v: t.ancestors(v) for vs in occ.values() for v in vs}

    def refine(col):
        ncls = len(set(col.values()))
        while True:
            keys = _node_keys(t, lambda d: (1, col[d]))
            sig = {
                d: (col[d], tuple(sorted(tuple(keys[a] for a in chains[v]) for v in vs)))
                for d, vs in occ.items()
            }
            ranks = {s: i for i, s in enumerate(sorted(set(sig.values())))}
            col = {d: ranks[s] for d, s in sig.items()}
            n2 = len(ranks)
            if n2 == ncls:
                return col, keys
            ncls = n2

    def search(col):
        col, keys = refine(col)
        if len(set(col.values())) == len(col):
            return keys[0]
        counts = Counter(col.values())
        cell_color = min(c for c, k in counts.items() if k > 1)
        best = None
        for d in sorted(x for x in col if col[x] == cell_color):
            nxt = {u: 2 * c + 1 for u, c in col.items()}
            nxt[d] = 2 * col[d]
            k = search(nxt)
            if best is None or k < best:
                best = k
        return best

    return search({d: 0 for d in occ})


def canonical_hash(t: DataTree) -> int:
    return hash(canonical_key(t))


# DTDs ---------------------------------------------------------------------

DOM = "dom"


@dataclass(frozen=True)
class Count:
    """Atom ``|symbol| >= k``; ``symbol`` is a tag or :data:`DOM`."""

    symbol: str
    k: int


@dataclass(frozen=True)
class Dtd:
    root_labels: frozenset
    rules: Mapping[str, object] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "root_labels", frozenset(self.root_labels))
        object.__setattr__(self, "rules", dict(self.rules))

    @property
    def positive(self) -> bool:
        return all(is_positive(f) for f in self.rules.values())

    def dependencies(self) -> dict[str, set]:
        return {
            a: {at.symbol for at in atoms(f) if at.symbol != DOM}
            for a, f in self.rules.items()
        }

    def find_cycle(self):
        deps = self.dependencies()
        state: dict[str, int] = {}
        stack: list[str] = []

        def visit(a):
            state[a] = 1
            stack.append(a)
            for b in sorted(deps.get(a, ())):
                if state.get(b) == 1:
                    return stack[stack.index(b):] + [b]
                if b not in state:
                    cyc = visit(b)
                    if cyc:
                        return cyc
            stack.pop()
            state[a] = 2
            return None

        for a in sorted(deps):
            if a not in state:
                cyc = visit(a)
                if cyc:
                    return cyc
        return None

    @property
    def non_recursive(self) -> bool:
        return self.find_cycle() is None

    @property
    def max_count(self) -> int:
        return max((at.k for f in self.rules.values() for at in atoms(f)), default=0)

    def formula(self, tag: str):
        return self.rules.get(tag, TRUE)


def child_counts(t: DataTree, v: int) -> Counter:
    c: Counter = Counter()
    for ch in t.children[v]:
        lab = t.labels[ch]
        c[DOM if is_data(lab) else lab] += 1
    return c


def satisfies_counts(formula, counts: Mapping[str, int]) -> bool:
    return evaluate(formula, lambda at: counts.get(at.symbol, 0) >= at.k)


def dtd_violations(t: DataTree, d: Dtd) -> list[int]:
    """Node ids whose children violate their tag's rule (root label check excluded)."""
    bad = []
    for v, lab in enumerate(t.labels):
        if is_data(lab) or lab not in d.rules:
            continue
        if not satisfies_counts(d.rules[lab], child_counts(t, v)):
            bad.append(v)
    return bad


def dtd_check(t: DataTree, d: Dtd) -> bool:
    root = t.labels[0]
    if is_data(root) or root not in d.root_labels:
        return False
    return not dtd_violations(t, d)


def dtd_depth_bound(d: Dtd) -> int:
    cyc = d.find_cycle()
    if cyc:
        raise RecursiveDtdError(cyc)
    deps = d.dependencies()
    memo: dict[str, int] = {}

    def longest(a):
        if a not in memo:
            memo[a] = max((1 + longest(b) for b in deps.get(a, ())), default=0)
        return memo[a]

    return max((longest(a) for a in d.root_labels), default=0) + 1


# graph view ---------------------------------------------------------------

VALUE_VERTEX = "$"


@dataclass(frozen=True)
class LabeledGraph:
    """Simple undirected vertex-labeled graph on vertices ``0..n-1``."""

    labels: tuple
    edges: frozenset

    def __post_init__(self):
        n = len(self.labels)
        norm = set()
        for e in self.edges:
            a, b = tuple(e)
            if a == b or not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"bad edge {e}")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))

    def __len__(self):
        return len(self.labels)

    @cached_property
    def adj(self) -> tuple:
        nb: list[set] = [set() for _ in self.labels]
        for a, b in self.edges:
            nb[a].add(b)
            nb[b].add(a)
        return tuple(tuple(sorted(s)) for s in nb)

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def is_connected(self) -> bool:
        if not self.labels:
            return True
        seen = {0}
        todo = [0]
        while todo:
            for w in self.adj[todo.pop()]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return len(seen) == len(self.labels)


def graph_of(t: DataTree, depth_bound: int | None = None) -> LabeledGraph:
    """Tree nodes keep their ids; one extra vertex per distinct data value,
    numbered after the tree nodes in order of first occurrence."""
    if depth_bound is not None and depth(t) > depth_bound:
        raise BoundViolation(
            f"tree depth {depth(t)} exceeds bound {depth_bound}", t, depth(t), depth_bound
        )
    n = len(t)
    labels: list = []
    value_vertex: dict[int, int] = {}
    edges = set()
    for v, lab in enumerate(t.labels):
        d = t.depths[v]
        if is_data(lab):
            labels.append((None, d))
            if lab not in value_vertex:
                value_vertex[lab] = n + len(value_vertex)
            edges.add((v, value_vertex[lab]))
        else:
            labels.append((lab, d))
        if v:
            edges.add((t.parents[v], v))
    labels.extend(VALUE_VERTEX for _ in value_vertex)
    return LabeledGraph(tuple(labels), frozenset(edges))


def longest_simple_path(g: LabeledGraph, limit: int | None = None) -> int:
    """Exact maximum edge count of a simple path (exhaustive search).

    With ``limit`` the search stops as soon as a path longer than ``limit``
    is found, and that length is returned.
    """
    n = len(g)
    if n <= 1:
        return 0
    adj = g.adj
    best = 0
    on = [False] * n
    ceiling = n - 1 if limit is None else min(n - 1, limit + 1)

    def dfs(v, length):
        nonlocal best
        if length > best:
            best = length
            if best >= ceiling:
                return True
        on[v] = True
        for w in adj[v]:
            if not on[w] and dfs(w, length + 1):
                on[v] = False
                return True
        on[v] = False
        return False

    for s in range(n):
        if dfs(s, 0):
            break
    return best


def exceeds_simple_path(t: DataTree, bound: int) -> bool:
    g = graph_of(t)
    if len(g) - 1 <= bound:
        # too few vertices for a longer path
        return False
    return longest_simple_path(g, limit=bound) > bound
