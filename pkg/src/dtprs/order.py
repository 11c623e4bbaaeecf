"""The embedding quasi-order on data trees, induced subgraphs of labeled
graphs, DFS tree decompositions and their labeled-tree encoding."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional

from .errors import BoundViolation, UsageError
from .trees import DataTree, LabeledGraph, is_data, longest_simple_path


def _bipartite_ok(left, right, ok) -> bool:
    """Is there a matching saturating ``left`` under compatibility ``ok``?"""
    if len(left) > len(right):
        return False
    match: dict = {}

    def augment(a, seen):
        for b in right:
            if b in seen or not ok(a, b):
                continue
            seen.add(b)
            if b not in match or augment(match[b], seen):
                match[b] = a
                return True
        return False

    return all(augment(a, set()) for a in left)


def _profile(t: DataTree) -> Counter:
    prof = t.__dict__.get("_profile")
    if prof is None:
        prof = Counter((None if is_data(lab) else lab, d) for lab, d in zip(t.labels, t.depths))
        t.__dict__["_profile"] = prof
    return prof


def embeds(t1: DataTree, t2: DataTree) -> Optional[tuple]:
    """Witness of ``t1`` below ``t2`` in the embedding order, or ``None``.

    The witness is a tuple mapping each node of ``t1`` to a node of ``t2``.
    """
    n1 = len(t1)
    if n1 > len(t2):
        return None
    p1, p2 = _profile(t1), _profile(t2)
    if any(p2[k] < c for k, c in p1.items()):
        return None
    if len(t1.values()) > len(t2.values()):
        return None
    shape: dict = {}

    def label_ok(a, b):
        la, lb = t1.labels[a], t2.labels[b]
        return is_data(lb) if is_data(la) else la == lb

    def shape_ok(a, b):
        # data-blind feasibility, memoized
        key = (a, b)
        r = shape.get(key)
        if r is None:
            r = (
                label_ok(a, b)
                and t1.sizes[a] <= t2.sizes[b]
                and _bipartite_ok(t1.children[a], t2.children[b], shape_ok)
            )
            shape[key] = r
        return r

    if not shape_ok(0, 0):
        return None
    phi = [-1] * n1
    used: set = set()
    vmap: dict = {}
    vinv: dict = {}
    labels1, labels2 = t1.labels, t2.labels

    def rec(i):
        if i == n1:
            return True
        cands = t2.children[phi[t1.parents[i]]]
        for v in cands:
            if v in used or not shape_ok(i, v):
                continue
            bound = False
            if is_data(labels1[i]):
                a, b = labels1[i], labels2[v]
                if a in vmap:
                    if vmap[a] != b:
                        continue
                elif b in vinv:
                    continue
                else:
                    vmap[a] = b
                    vinv[b] = a
                    bound = True
            phi[i] = v
            used.add(v)
            if rec(i + 1):
                return True
            used.discard(v)
            if bound:
                del vmap[labels1[i]]
                del vinv[labels2[v]]
        return False

    phi[0] = 0
    used.add(0)
    if is_data(labels1[0]):
        vmap[labels1[0]] = labels2[0]
        vinv[labels2[0]] = labels1[0]
    return tuple(phi) if rec(1) else None


def precedes(t1: DataTree, t2: DataTree) -> bool:
    return embeds(t1, t2) is not None


def equivalent(t1: DataTree, t2: DataTree) -> bool:
    return len(t1) == len(t2) and embeds(t1, t2) is not None


def induced_subgraph(g1: LabeledGraph, g2: LabeledGraph) -> Optional[tuple]:
    """Injective label-preserving map with edges preserved both ways."""
    n1 = len(g1)
    if n1 > len(g2):
        return None
    c1, c2 = Counter(g1.labels), Counter(g2.labels)
    if any(c2[k] < c for k, c in c1.items()):
        return None
    order: list[int] = []
    seen: set = set()
    for s in range(n1):
        if s in seen:
            continue
        seen.add(s)
        queue = [s]
        while queue:
            u = queue.pop(0)
            order.append(u)
            for w in g1.adj[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
    phi = [-1] * n1
    used: set = set()
    mapped: list[int] = []

    def rec(k):
        if k == n1:
            return True
        u = order[k]
        anchor = next((w for w in g1.adj[u] if phi[w] >= 0), None)
        cands = g2.adj[phi[anchor]] if anchor is not None else range(len(g2))
        for v in cands:
            if v in used or g2.labels[v] != g1.labels[u]:
                continue
            if any(g1.has_edge(u, x) != g2.has_edge(v, phi[x]) for x in mapped):
                continue
            phi[u] = v
            used.add(v)
            mapped.append(u)
            if rec(k + 1):
                return True
            mapped.pop()
            used.discard(v)
            phi[u] = -1
        return False

    return tuple(phi) if rec(0) else None


# tree decompositions --------------------------------------------------------

@dataclass(frozen=True)
class TreeDecomposition:
    """Rooted decomposition tree on nodes ``0..m-1`` (node 0 is the root);
    every bag is a sequence of exactly ``k + 1`` graph vertices."""

    parents: tuple
    bags: tuple
    k: int

    @property
    def width(self) -> int:
        return max(len(set(b)) for b in self.bags) - 1

    @property
    def depth(self) -> int:
        best = 0
        for u in range(len(self.parents)):
            d, p = 0, self.parents[u]
            while p != -1:
                d += 1
                p = self.parents[p]
            best = max(best, d)
        return best

    def children(self, u: int) -> list[int]:
        return [w for w, p in enumerate(self.parents) if p == u]

    def is_valid_for(self, g: LabeledGraph) -> bool:
        verts = set()
        for b in self.bags:
            verts.update(b)
        if verts != set(range(len(g))):
            return False
        for a, b in g.edges:
            if not any(a in bag and b in bag for bag in self.bags):
                return False
        for v in range(len(g)):
            holders = {u for u, bag in enumerate(self.bags) if v in bag}
            tops = [u for u in holders if self.parents[u] not in holders]
            if len(tops) != 1:
                return False
        return True


def dfs_decomposition(g: LabeledGraph, k: Optional[int] = None, start: int = 0) -> TreeDecomposition:
    """Bag of each DFS-tree node = its DFS ancestors and itself, padded by
    repeating the node up to length ``k + 1``."""
    if len(g) == 0:
        raise UsageError("empty graph")
    if not g.is_connected():
        raise UsageError("dfs_decomposition needs a connected graph")
    if k is None:
        k = longest_simple_path(g)
    order: list[int] = []
    dfs_parent: dict = {start: None}
    stack_path: list[int] = []
    bags: dict = {}
    seen = {start}

    def visit(v):
        order.append(v)
        stack_path.append(v)
        if len(stack_path) > k + 1:
            raise BoundViolation(
                f"DFS branch longer than k={k}; graph has a simple path beyond the bound"
            )
        bag = list(stack_path)
        bags[v] = tuple(bag + [v] * (k + 1 - len(bag)))
        for w in g.adj[v]:
            if w not in seen:
                seen.add(w)
                dfs_parent[w] = v
                visit(w)
        stack_path.pop()

    visit(start)
    index = {v: i for i, v in enumerate(order)}
    parents = tuple(-1 if dfs_parent[v] is None else index[dfs_parent[v]] for v in order)
    return TreeDecomposition(parents, tuple(bags[v] for v in order), k)


def simple_path_bound(width: int, depth: int) -> int:
    """Upper bound on simple-path length for graphs having a decomposition
    of the given width and depth."""
    a = width + 2
    return a ** depth + sum(a ** i for i in range(1, depth + 1))


@dataclass(frozen=True)
class EncodedTree:
    parents: tuple
    labels: tuple

    def children(self, u: int) -> list[int]:
        return [w for w, p in enumerate(self.parents) if p == u]


def encode(d: TreeDecomposition, g: LabeledGraph) -> EncodedTree:
    size = d.k + 1
    labels = []
    for u, bag in enumerate(d.bags):
        if len(bag) != size:
            raise ValueError(f"bag {u} has length {len(bag)}, expected {size}")
        word = tuple(g.labels[v] for v in bag)
        eq = frozenset((i, j) for i in range(size) for j in range(size) if bag[i] == bag[j])
        adj = frozenset(
            (i, j) for i in range(size) for j in range(size) if g.has_edge(bag[i], bag[j])
            if bag[i] != bag[j]
        )
        p = d.parents[u]
        if p == -1:
            overlap = frozenset()
        else:
            pb = d.bags[p]
            overlap = frozenset(
                (i, j) for i in range(size) for j in range(size) if pb[i] == bag[j]
            )
        labels.append((word, eq, adj, overlap))
    return EncodedTree(d.parents, tuple(labels))


def label_tree_embeds(e1: EncodedTree, e2: EncodedTree) -> bool:
    """Root-, label- and parent-child-preserving injective map exists."""
    kids1 = [e1.children(u) for u in range(len(e1.parents))]
    kids2 = [e2.children(u) for u in range(len(e2.parents))]
    memo: dict = {}

    def ok(a, b):
        key = (a, b)
        if key not in memo:
            memo[key] = e1.labels[a] == e2.labels[b] and _bipartite_ok(kids1[a], kids2[b], ok)
        return memo[key]

    return ok(0, 0)
