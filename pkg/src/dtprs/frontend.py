"""Parser and printer for system (.dtprs), tree (.dtree) and pattern (.dtp) files.

Grammar sketch::

    system   := "system" NAME "{" [alphabet] dtd [invariant] [bounds] [init] rule* "}"
    alphabet := "alphabet" ":" NAME ("," NAME)* ";"
    dtd      := "dtd" "{" "root" ":" NAME ("," NAME)* ";" (NAME "->" count ";")* "}"
    count    := Boolean "and"/"or"/"not" over "|" NAME "|" ">=" INT   (NAME may be dom)
    bounds   := "bounds" "{" ["depth" ":" INT ";"] ["simple-path" ":" INT ";"] "}"
    init     := "init" "{" (tree ";")* "}"
              | "init" "symbolic" "{" dtd ["formula" ":" formula ";"] "cap" ":" INT ";" "}"
    rule     := "rule" NAME "{" "locator" ":" pattern ";" ["guard" ":" formula ";"]
                ("query" NAME ":" pattern "~>" template ";")*
                ("forest" NAME ":" template ("," template)* ";")* "}"
    pattern  := node ["where" cond]
    node     := "[" (NAME | "*") [annots] "]" ["(" ["-"] node ("," ["-"] node)* ")"]
              | "$" NAME [annots] | "@" INT [annots]
    annots   := "{" ("self" | "del" | "ren" "=" NAME | "append" "=" NAME)+ "}"
    cond     := "$X == $Y" / "$X != $Y" combined with "&&", "||", parentheses
    formula  := "true" | "false" | pattern | "not" f | f "and" f | f "or" f | "(" f ")"
    template := "[" NAME "]" ["(" template ("," template)* ")"] | "$" NAME | "@" INT | NAME

A ``#`` starts a comment when it follows whitespace (or begins a line) and
is itself followed by whitespace; otherwise it is an ordinary name
character, so ``[#]`` and ``alphabet: a, #;`` name the tag ``#``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import SpecError
from .logic import FALSE, TRUE, And, Const, Not, Or
from .patterns import (
    CHILD,
    WILDCARD,
    Eq,
    Neq,
    PNode,
    Query,
    QueryRef,
    TNode,
    TreePattern,
    Var,
    flatten,
)
from .rewrite import InitSpec, Locator, Rule, System
from .trees import DOM, Count, DataTree, Dtd, canonical_key, is_data

_NAME_START = r"[A-Za-z0-9_.#?!\u0080-￿]"
_NAME_REST = r"[A-Za-z0-9_.#?!$\-\u0080-￿]"
_TOKEN = re.compile(
    rf"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<op>~>|->|>=|==|!=|&&|\|\||[\[\](){{}},;:=|$@*\-])
  | (?P<name>{_NAME_START}{_NAME_REST}*)
    """,
    re.VERBOSE,
)


@dataclass
class Tok:
    kind: str  # name, int, string, op, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    pos, line, lstart = 0, 1, 0
    prev_ws = True
    while pos < len(text):
        ch = text[pos]
        if ch == "#" and prev_ws and (pos + 1 == len(text) or text[pos + 1].isspace()):
            end = text.find("\n", pos)
            pos = len(text) if end == -1 else end
            continue
        m = _TOKEN.match(text, pos)
        if not m:
            raise SpecError("E_SYNTAX", f"unexpected character {ch!r}", line, pos - lstart + 1)
        kind = m.lastgroup
        col = pos - lstart + 1
        if kind == "nl":
            line += 1
            lstart = m.end()
            prev_ws = True
        elif kind == "ws":
            prev_ws = True
        else:
            val = m.group()
            if kind == "name" and val.isdigit():
                kind = "int"
            if kind == "name" and val.endswith("-"):
                raise SpecError("E_SYNTAX", f"name cannot end with '-': {val}", line, col)
            toks.append(Tok(kind, val, line, col))
            prev_ws = False
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - lstart + 1))
    return toks


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.strings: dict[str, int] = {}
        self.tags_seen: list[tuple[str, Tok]] = []

    # token helpers
    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def error(self, msg, tok=None, code="E_SYNTAX"):
        tok = tok or self.tok
        return SpecError(code, msg, tok.line, tok.col)

    def at(self, text) -> bool:
        return self.tok.kind in ("op", "name") and self.tok.text == text

    def accept(self, text) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text) -> Tok:
        if not self.at(text):
            raise self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def name(self) -> str:
        if self.tok.kind not in ("name", "int"):
            raise self.error(f"expected a name, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t.text

    def integer(self) -> int:
        if self.tok.kind != "int":
            raise self.error(f"expected an integer, found {self.tok.text!r}")
        t = self.tok
        self.i += 1
        return int(t.text)

    def tag(self) -> str:
        tok = self.tok
        name = self.name()
        self.tags_seen.append((name, tok))
        return name

    def end(self):
        if self.tok.kind != "eof":
            raise self.error(f"trailing input {self.tok.text!r}")

    # trees
    def tree(self) -> DataTree:
        return DataTree.from_nested(self._tree_node())

    def _tree_node(self):
        tok = self.tok
        if self.accept("@"):
            return self.integer()
        if tok.kind == "string":
            self.i += 1
            return ("string", tok.text)
        if self.at("$"):
            raise self.error("variables are not allowed in data trees", code="E_TREE_VAR")
        self.expect("[")
        if self.at("*"):
            raise self.error("wildcards are not allowed in data trees", code="E_TREE_VAR")
        label = self.tag()
        if self.at("{"):
            raise self.error("annotations are not allowed in data trees", code="E_TREE_VAR")
        self.expect("]")
        kids = []
        if self.accept("("):
            if not self.at(")"):
                while True:
                    if self.at("-"):
                        raise self.error("descendant edges are not allowed in data trees",
                                         code="E_TREE_VAR")
                    kids.append(self._tree_node())
                    if not self.accept(","):
                        break
            self.expect(")")
        return (label, kids)

    def intern_strings(self, nested, taken: set):
        """Replace quoted-string leaves by naturals unused in ``taken``."""
        def walk(n):
            if isinstance(n, tuple) and n[0] == "string":
                s = n[1]
                if s not in self.strings:
                    v = 0
                    while v in taken or v in self.strings.values():
                        v += 1
                    self.strings[s] = v
                return self.strings[s]
            if isinstance(n, tuple):
                return (n[0], [walk(c) for c in n[1]])
            return n
        return walk(nested)

    def data_tree(self) -> DataTree:
        nested = self._tree_node()
        ints: set = set()

        def collect(n):
            if isinstance(n, int):
                ints.add(n)
            elif isinstance(n, tuple) and n[0] != "string":
                for c in n[1]:
                    collect(c)

        collect(nested)
        return DataTree.from_nested(self.intern_strings(nested, ints))

    # patterns
    def pnode(self, allow_annots: bool) -> PNode:
        tok = self.tok
        desc = False
        if self.accept("$"):
            node = PNode(Var(self.name()))
        elif self.accept("@"):
            node = PNode(self.integer())
        else:
            self.expect("[")
            node = PNode(WILDCARD if self.accept("*") else self.tag())
            if self.at("{"):
                node.annots = self.annots(allow_annots)
            self.expect("]")
            node.desc = desc
        if not isinstance(node.label, str) and node.label is not WILDCARD and self.at("{"):
            node.annots = self.annots(allow_annots)
        if self.accept("("):
            if not isinstance(node.label, str) and node.label is not WILDCARD:
                raise self.error("variables and data constants must be leaves", tok,
                                 code="E_NONLEAF_VAR")
            if not self.at(")"):
                while True:
                    d = self.accept("-")
                    child = self.pnode(allow_annots)
                    child.desc = d
                    node.children.append(child)
                    if not self.accept(","):
                        break
            self.expect(")")
        return node

    def annots(self, allowed: bool) -> dict:
        tok = self.expect("{")
        ann: dict = {}
        while not self.at("}"):
            word = self.name()
            if word in ("self", "del"):
                ann[word] = True
            elif word in ("ren", "append"):
                self.expect("=")
                ann[word] = self.tag() if word == "ren" else self.name()
            else:
                raise self.error(f"unknown annotation {word!r}")
            self.accept(",")
        self.expect("}")
        if not allowed and set(ann) - {"self"}:
            raise self.error("action annotations are only allowed in locators", tok,
                             code="E_ANNOT")
        return ann

    def cond(self):
        items = [self._cond_and()]
        while self.accept("||"):
            items.append(self._cond_and())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def _cond_and(self):
        items = [self._cond_atom()]
        while self.accept("&&"):
            items.append(self._cond_atom())
        return items[0] if len(items) == 1 else And(tuple(items))

    def _cond_atom(self):
        if self.accept("("):
            c = self.cond()
            self.expect(")")
            return c
        self.expect("$")
        a = self.name()
        if self.accept("=="):
            kind = Eq
        elif self.accept("!="):
            kind = Neq
        else:
            raise self.error("expected '==' or '!='")
        self.expect("$")
        return kind(a, self.name())

    def pattern_with_annots(self, allow_annots: bool):
        tok = self.tok
        root = self.pnode(allow_annots)
        cond = TRUE
        if self.accept("where"):
            cond = self.cond()
        try:
            pat, annots = flatten(root, cond)
        except ValueError as exc:
            raise self.error(str(exc), tok, code="E_PATTERN") from None
        return root, cond, pat, annots

    def pattern(self) -> TreePattern:
        _, _, pat, _ = self.pattern_with_annots(False)
        return pat

    # formulas
    def formula(self, atom):
        items = [self._f_and(atom)]
        while self.accept("or"):
            items.append(self._f_and(atom))
        return items[0] if len(items) == 1 else Or(tuple(items))

    def _f_and(self, atom):
        items = [self._f_not(atom)]
        while self.accept("and"):
            items.append(self._f_not(atom))
        return items[0] if len(items) == 1 else And(tuple(items))

    def _f_not(self, atom):
        if self.accept("not"):
            return Not(self._f_not(atom))
        if self.accept("true"):
            return TRUE
        if self.accept("false"):
            return FALSE
        if self.accept("("):
            f = self.formula(atom)
            self.expect(")")
            return f
        return atom()

    def pattern_formula(self):
        return self.formula(self.pattern)

    def count_formula(self):
        def atom():
            self.expect("|")
            tok = self.tok
            sym = self.name()
            if sym != DOM:
                self.tags_seen.append((sym, tok))
            self.expect("|")
            self.expect(">=")
            return Count(sym, self.integer())
        return self.formula(atom)

    # templates
    def template(self, allow_queries: bool) -> TNode:
        tok = self.tok
        if self.accept("$"):
            return TNode(Var(self.name()))
        if self.accept("@"):
            return TNode(self.integer())
        if tok.kind in ("name", "int") and allow_queries:
            self.i += 1
            return TNode(QueryRef(tok.text))
        self.expect("[")
        label = self.tag()
        self.expect("]")
        kids = []
        if self.accept("("):
            if not self.at(")"):
                while True:
                    kids.append(self.template(allow_queries))
                    if not self.accept(","):
                        break
            self.expect(")")
        return TNode(label, tuple(kids))

    # system
    def dtd(self) -> Dtd:
        self.expect("dtd")
        self.expect("{")
        self.expect("root")
        self.expect(":")
        roots = [self.tag()]
        while self.accept(","):
            roots.append(self.tag())
        self.expect(";")
        rules = {}
        while not self.at("}"):
            tok = self.tok
            a = self.tag()
            self.expect("->")
            if a in rules:
                raise self.error(f"duplicate DTD rule for {a}", tok, code="E_DUP")
            rules[a] = self.count_formula()
            self.expect(";")
        self.expect("}")
        return Dtd(frozenset(roots), rules)

    def system(self) -> System:
        self.expect("system")
        name = self.name()
        self.expect("{")
        alphabet = None
        if self.accept("alphabet"):
            self.expect(":")
            alphabet = [self.name()]
            while self.accept(","):
                alphabet.append(self.name())
            self.expect(";")
        dtd = self.dtd()
        invariant = TRUE
        if self.accept("invariant"):
            self.expect(":")
            invariant = self.pattern_formula()
            self.expect(";")
        depth_bound = path_bound = None
        if self.accept("bounds"):
            self.expect("{")
            if self.accept("depth"):
                self.expect(":")
                depth_bound = self.integer()
                self.expect(";")
            if self.accept("simple-path"):
                self.expect(":")
                path_bound = self.integer()
                self.expect(";")
            self.expect("}")
        init = InitSpec()
        if self.accept("init"):
            init = self.init_spec()
        rules = []
        names = set()
        while self.at("rule"):
            tok = self.tok
            r = self.rule()
            if r.name in names:
                raise self.error(f"duplicate rule {r.name}", tok, code="E_DUP")
            names.add(r.name)
            rules.append(r)
        self.expect("}")
        self.end()
        if alphabet is None:
            alphabet = sorted({t for t, _ in self.tags_seen})
        else:
            for t, tok in self.tags_seen:
                if t not in alphabet:
                    raise self.error(f"tag {t!r} is not in the alphabet", tok, code="E_UNKNOWN_TAG")
        return System(name, tuple(alphabet), tuple(rules), dtd, invariant,
                      depth_bound, path_bound, init)

    def init_spec(self) -> InitSpec:
        if self.accept("symbolic"):
            self.expect("{")
            dtd = self.dtd()
            formula = TRUE
            if self.accept("formula"):
                self.expect(":")
                formula = self.pattern_formula()
                self.expect(";")
            self.expect("cap")
            self.expect(":")
            cap = self.integer()
            self.expect(";")
            self.expect("}")
            return InitSpec((), dtd, formula, cap)
        self.expect("{")
        trees = []
        while not self.at("}"):
            trees.append(self.data_tree())
            self.expect(";")
        self.expect("}")
        return InitSpec(tuple(trees))

    def rule(self) -> Rule:
        start = self.expect("rule")
        name = self.name()
        self.expect("{")
        self.expect("locator")
        self.expect(":")
        ltok = self.tok
        root, cond, pat, annots = self.pattern_with_annots(True)
        self.expect(";")
        guard = TRUE
        if self.accept("guard"):
            self.expect(":")
            guard = self.pattern_formula()
            self.expect(";")
        queries = {}
        while self.at("query"):
            self.i += 1
            qtok = self.tok
            qname = self.name()
            self.expect(":")
            body = self.pattern()
            self.expect("~>")
            head = self.template(False)
            self.expect(";")
            hv = head.variables() - body.variables
            if hv:
                raise self.error(f"head variable(s) {sorted(hv)} absent from the body of {qname}",
                                 qtok, code="E_HEAD_VAR")
            try:
                queries[qname] = Query(body, head)
            except ValueError as exc:
                raise self.error(str(exc), qtok, code="E_QUERY") from None
        forests = {}
        ftoks = {}
        while self.at("forest"):
            self.i += 1
            ftok = self.tok
            fname = self.name()
            self.expect(":")
            trees = [self.template(True)]
            while self.accept(","):
                trees.append(self.template(True))
            self.expect(";")
            forests[fname] = tuple(trees)
            ftoks[fname] = ftok
        self.expect("}")
        for i, ann in enumerate(annots):
            if ann.get("append") and ann["append"] not in forests:
                raise self.error(f"append names undefined forest {ann['append']!r}", ltok,
                                 code="E_UNDEF_FOREST")
        dels = set()
        for i, ann in enumerate(annots):
            if ann.get("del") or (i and pat.parents[i] in dels):
                dels.add(i)
                if ann.get("append") or ann.get("ren"):
                    raise self.error("append/ren on a node inside a deleted subtree", ltok,
                                     code="E_DEL_APPEND")
        for fname, trees in forests.items():
            for tr in trees:
                missing = tr.query_refs() - set(queries)
                if missing:
                    raise self.error(f"forest {fname} references undefined query {sorted(missing)}",
                                     ftoks[fname], code="E_UNDEF_QUERY")
        try:
            loc = Locator.from_pnode(root, cond)
            return Rule(name, loc, guard, queries, forests)
        except ValueError as exc:
            raise self.error(str(exc), start, code="E_RULE") from None


def parse_system(text: str) -> System:
    return Parser(text).system()


def parse_tree(text: str) -> DataTree:
    p = Parser(text)
    t = p.data_tree()
    p.end()
    return t


def parse_pattern(text: str) -> TreePattern:
    p = Parser(text)
    pat = p.pattern()
    p.end()
    return pat


def parse_formula(text: str):
    p = Parser(text)
    f = p.pattern_formula()
    p.end()
    return f


def parse_locator(text: str) -> Locator:
    p = Parser(text)
    root, cond, _, _ = p.pattern_with_annots(True)
    p.end()
    return Locator.from_pnode(root, cond)


# printing -------------------------------------------------------------------

def print_tree(t: DataTree, canonical: bool = True) -> str:
    """Canonical form (children sorted, values renamed by first occurrence)
    or, with ``canonical=False``, stored order with the exact values."""
    if not canonical:
        def rec(v):
            lab = t.labels[v]
            if is_data(lab):
                return f"@{lab}"
            kids = t.children[v]
            return f"[{lab}]" + ("(" + ", ".join(rec(c) for c in kids) + ")" if kids else "")
        return rec(0)
    renum: dict = {}

    def rec_key(k):
        if k[0] == 1:
            return "@" + str(renum.setdefault(k[1], len(renum)))
        _, lab, kids = k
        return f"[{lab}]" + ("(" + ", ".join(rec_key(c) for c in kids) + ")" if kids else "")

    return rec_key(canonical_key(t))


def _print_label(lab) -> str:
    if isinstance(lab, Var):
        return f"${lab.name}"
    if lab is WILDCARD:
        return "*"
    if is_data(lab):
        return f"@{lab}"
    return lab


def _print_annots(ann: dict) -> str:
    parts = []
    if ann.get("self"):
        parts.append("self")
    if ann.get("del"):
        parts.append("del")
    if ann.get("ren"):
        parts.append(f"ren={ann['ren']}")
    if ann.get("append"):
        parts.append(f"append={ann['append']}")
    return "{" + ", ".join(parts) + "}" if parts else ""


def print_cond(c, outer=None) -> str:
    if isinstance(c, Eq):
        return f"${c.left} == ${c.right}"
    if isinstance(c, Neq):
        return f"${c.left} != ${c.right}"
    op = "&&" if isinstance(c, And) else "||"
    s = f" {op} ".join(print_cond(i, type(c)) for i in c.items)
    return f"({s})" if outer is not None else s


def print_pattern(p: TreePattern, locator: Locator | None = None) -> str:
    def ann(v):
        if locator is not None:
            a = locator.annotations(v)
            # del on descendants is implied by the top del node
            if v in locator.dels and v not in locator.top_dels:
                a.pop("del")
            return a
        return {"self": True} if v == p.self_node else {}

    def rec(v):
        lab = p.labels[v]
        a = _print_annots(ann(v))
        if isinstance(lab, str) or lab is WILDCARD:
            s = f"[{_print_label(lab)}{a}]"
        else:
            s = _print_label(lab) + a
        kids = p.children[v]
        if kids:
            s += "(" + ", ".join(("" if p.edges[c] == CHILD else "-") + rec(c) for c in kids) + ")"
        return s

    out = rec(0)
    if p.cond != TRUE:
        out += " where " + print_cond(p.cond)
    return out


def print_formula(f, atom=print_pattern, outer=None) -> str:
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Not):
        return "not " + print_formula(f.item, atom, Not)
    if isinstance(f, (And, Or)):
        op = " and " if isinstance(f, And) else " or "
        s = op.join(print_formula(i, atom, type(f)) for i in f.items)
        return f"({s})" if outer is not None else s
    s = atom(f)
    # a pattern with a where-clause needs parentheses inside a formula
    return f"({s})" if outer is not None and " where " in s else s


def print_count_formula(f) -> str:
    return print_formula(f, lambda at: f"|{at.symbol}| >= {at.k}")


def print_template(tn: TNode) -> str:
    lab = tn.label
    if isinstance(lab, QueryRef):
        return lab.name
    if not isinstance(lab, str):
        return _print_label(lab)
    s = f"[{lab}]"
    if tn.children:
        s += "(" + ", ".join(print_template(c) for c in tn.children) + ")"
    return s


def print_dtd(d: Dtd, indent="  ") -> str:
    lines = [f"{indent}dtd {{", f"{indent}  root: " + ", ".join(sorted(d.root_labels)) + ";"]
    for a in sorted(d.rules):
        lines.append(f"{indent}  {a} -> {print_count_formula(d.rules[a])};")
    lines.append(f"{indent}}}")
    return "\n".join(lines)


def print_rule(r: Rule) -> str:
    lines = [f"  rule {r.name} {{",
             f"    locator: {print_pattern(r.locator.base, r.locator)};"]
    if r.guard != TRUE:
        lines.append(f"    guard: {print_formula(r.guard)};")
    for qn, q in r.queries.items():
        lines.append(f"    query {qn}: {print_pattern(q.body)} ~> {print_template(q.head)};")
    for fn, forest in r.forests.items():
        lines.append(f"    forest {fn}: " + ", ".join(print_template(t) for t in forest) + ";")
    lines.append("  }")
    return "\n".join(lines)


def print_system(s: System) -> str:
    lines = [f"system {s.name} {{", "  alphabet: " + ", ".join(s.alphabet) + ";", print_dtd(s.dtd)]
    if s.invariant != TRUE:
        lines.append(f"  invariant: {print_formula(s.invariant)};")
    bounds = []
    if s.depth_bound is not None:
        bounds.append(f"depth: {s.depth_bound};")
    if s.path_bound is not None:
        bounds.append(f"simple-path: {s.path_bound};")
    if bounds:
        lines.append(f"  bounds {{ {' '.join(bounds)} }}")
    if s.init.symbolic:
        lines.append("  init symbolic {")
        lines.append(print_dtd(s.init.dtd, "    "))
        if s.init.formula != TRUE:
            lines.append(f"    formula: {print_formula(s.init.formula)};")
        lines.append(f"    cap: {s.init.cap};")
        lines.append("  }")
    elif s.init.trees:
        lines.append("  init {")
        for t in s.init.trees:
            lines.append(f"    {print_tree(t, canonical=False)};")
        lines.append("  }")
    for r in s.rules:
        lines.append(print_rule(r))
    lines.append("}")
    return "\n".join(lines) + "\n"
