import random

import pytest

from dtprs.errors import PreconditionError
from dtprs.frontend import parse_pattern, parse_system, parse_tree
from dtprs.order import embeds, equivalent
from dtprs.pred import is_predecessor, minimal_matching_trees, pred_basis
from dtprs.rewrite import succ
from dtprs.trees import dtd_check
from oracles import all_trees, minimal
from randsys import random_positive_system, random_tree


def small(body: str, dtd: str = "root: a, b;"):
    return parse_system(f"system s {{ alphabet: a, b, c; dtd {{ {dtd} }} "
                        f"bounds {{ depth: 3; simple-path: 30; }} {body} }}")


def oracle_basis(sys, t, cap, depth=3):
    trees = all_trees(tuple(sys.alphabet), tuple(sorted(sys.dtd.root_labels)), cap, depth)
    preds = [x for x in trees if sys.satisfies_invariant(x) and sys.within_bounds(x)
             and any(embeds(t, r) is not None for _, r in succ(sys, x, bounds="drop"))]
    return minimal(preds, lambda a, b: embeds(a, b) is not None)


def same_antichain(xs, ys) -> bool:
    return len(xs) == len(ys) and all(any(equivalent(a, b) for b in ys) for a in xs)


def test_no_rules_empty_basis():
    s = small("")
    b = pred_basis(s, parse_tree("[a]"))
    assert list(b) == [] and not b.capped


def test_root_rename_inverts():
    s = small("rule r { locator: [a{ren=b}]; }")
    b = pred_basis(s, parse_tree("[b]"))
    assert [str(x) for x in b] == [str(parse_tree("[a]"))]


def test_rename_with_dtd_completion():
    s = small("rule r { locator: [a{ren=b}]; }", "root: a, b; a -> |c| >= 1;")
    (x,) = pred_basis(s, parse_tree("[b]"))
    assert equivalent(x, parse_tree("[a]([c])"))


def test_repeated_count_atoms_take_the_maximum():
    s = small("rule r { locator: [a{self}]($Y{del}); }", "root: a; a -> |c| >= 1 and |c| >= 2;")
    (x,) = pred_basis(s, parse_tree("[a]"), 6)
    assert equivalent(x, parse_tree("[a]([c], [c], @0)"))


def test_enumerate_agrees_on_small_case():
    s = small("rule r { locator: [a{append=F}]([b]); forest F: [c]; }")
    t = parse_tree("[a]([c])")
    got = list(pred_basis(s, t, 4))
    enum = list(pred_basis(s, t, 4, method="enumerate"))
    assert same_antichain(got, enum)
    assert same_antichain(got, oracle_basis(s, t, 4))


def test_negative_system_rejected():
    s = small("rule r { locator: [a]; guard: not [a]([b]); }")
    with pytest.raises(PreconditionError):
        pred_basis(s, parse_tree("[a]"))
    with pytest.raises(ValueError):
        pred_basis(small("rule r { locator: [a]; }"), parse_tree("[a]"), method="guess")


def test_minimal_matching_trees_complete_dtd():
    s = small("", "root: a; b -> |c| >= 1;")
    b = minimal_matching_trees(s, parse_pattern("[a]([b])"), 6)
    assert [str(x) for x in b] == [str(parse_tree("[a]([b]([c]))"))]


@pytest.mark.parametrize("seed", range(1000, 1012))
def test_basis_matches_exhaustive_oracle(seed):
    rng = random.Random(seed)
    s = random_positive_system(rng)
    t = random_tree(rng, s.alphabet, 5, 3, root=s.alphabet[0], max_depth=3)
    b = pred_basis(s, t, 6)
    orc = oracle_basis(s, t, 6)
    if not b.capped:
        assert same_antichain(list(b), orc)
    for x in b:
        assert dtd_check(x, s.dtd) and s.satisfies_invariant(x)
        assert is_predecessor(s, x, t)
        assert not any(embeds(y, x) is not None for y in b if y is not x)
