"""Small Boolean formula algebra shared by DTD count formulas, data
constraints and pattern formulas.

Atoms are arbitrary frozen objects; evaluation is driven by a callback.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator


@dataclass(frozen=True)
class Const:
    value: bool


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class And:
    items: tuple


@dataclass(frozen=True)
class Or:
    items: tuple


@dataclass(frozen=True)
class Not:
    item: object


def conj(*items):
    items = tuple(i for i in items if i != TRUE)
    if not items:
        return TRUE
    if len(items) == 1:
        return items[0]
    return And(items)


def evaluate(f, atom: Callable[[object], bool]) -> bool:
    if isinstance(f, Const):
        return f.value
    if isinstance(f, And):
        return all(evaluate(i, atom) for i in f.items)
    if isinstance(f, Or):
        return any(evaluate(i, atom) for i in f.items)
    if isinstance(f, Not):
        return not evaluate(f.item, atom)
    return atom(f)


def atoms(f) -> Iterator[object]:
    if isinstance(f, Const):
        return
    if isinstance(f, (And, Or)):
        for i in f.items:
            yield from atoms(i)
    elif isinstance(f, Not):
        yield from atoms(f.item)
    else:
        yield f


def is_positive(f) -> bool:
    if isinstance(f, Not):
        return False
    if isinstance(f, (And, Or)):
        return all(is_positive(i) for i in f.items)
    return True


def dnf(f) -> list[frozenset]:
    """Clauses (sets of atoms) of a positive formula; each clause suffices.

    ``[]`` means unsatisfiable, ``[frozenset()]`` means valid.
    """
    if isinstance(f, Const):
        return [frozenset()] if f.value else []
    if isinstance(f, Or):
        out: list[frozenset] = []
        for i in f.items:
            out.extend(dnf(i))
        return _minimal_clauses(out)
    if isinstance(f, And):
        acc = [frozenset()]
        for i in f.items:
            acc = _minimal_clauses([a | b for a in acc for b in dnf(i)])
        return acc
    if isinstance(f, Not):
        raise ValueError("dnf() needs a positive formula")
    return [frozenset([f])]


def _minimal_clauses(clauses):
    uniq = sorted(set(clauses), key=len)
    keep: list[frozenset] = []
    for c in uniq:
        if not any(k <= c for k in keep):
            keep.append(c)
    return keep
