"""Packaged case studies and the PCP instance generator."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .errors import UsageError

SUCCESS = "√"


def example_names() -> list[str]:
    return sorted(p.name for p in resources.files("dtprs.data").iterdir()
                  if p.name.endswith((".dtprs", ".dtree", ".dtp")))


def example_text(name: str) -> str:
    path = resources.files("dtprs.data") / name
    if not path.is_file():
        raise UsageError(f"no packaged example named {name!r}")
    return path.read_text(encoding="utf-8")


@dataclass(frozen=True)
class PcpFiles:
    system: str
    pattern: str


def covered(letter: str) -> str:
    return "v." + letter


def _chain(letters: str, first: str, prefix: str, cover: int = 0,
           rename: bool = False) -> tuple[list[str], str]:
    """Position nodes for ``letters`` linked by shared values, starting at ``first``.

    The first ``cover`` nodes get the covered tag, renamed in place when
    ``rename`` is set and written directly otherwise.
    """
    nodes, prev = [], first
    for i, ch in enumerate(letters, 1):
        nxt = f"{prefix}{i}"
        if i > cover:
            tag = ch
        elif rename:
            tag = f"{ch}{{ren={covered(ch)}}}"
        else:
            tag = covered(ch)
        nodes.append(f"[{tag}](${prev}, ${nxt})")
        prev = nxt
    return nodes, prev


def _pair_rule(name: str, u: str, v: str, over: int) -> str:
    """Rule for a pair whose last ``over`` letters of v run past the end of U."""
    inside = v[:len(v) - over]
    vnodes, vlast = _chain(inside, "H", "X", cover=len(inside), rename=True)
    unodes, ulast = _chain(u, "E", "Y", cover=over)
    if over:
        # the checked part of v must stop exactly where U ends
        if vnodes:
            vnodes[-1] = vnodes[-1].replace(f"${vlast})", "$E)")
        else:
            vnodes = []
        vlast = f"Y{over}"
    root = "[root{append=F}]" if u else "[root]"
    if v:
        parts = ["[#{append=G}]($H{del})"] + vnodes
    else:
        parts = ["[#]($H)"]
    if u:
        end = "[end{append=K}]($E{del})"
    else:
        end = "[end]($E)"
    if over and not inside:
        end = end.replace("$E", "$H")
        unodes = [n.replace("$E,", "$H,") for n in unodes]
    parts.append(end)
    lines = [f"  rule {name} {{", f"    locator: {root}({', '.join(parts)});"]
    if u:
        lines.append(f"    forest F: {', '.join(unodes)};")
    if v:
        lines.append(f"    forest G: ${vlast};")
    if u:
        lines.append(f"    forest K: ${ulast};")
    lines.append("  }")
    return "\n".join(lines)


def _final_rule(name: str, u: str, v: str) -> str | None:
    k = len(v) - len(u)
    if k < 0 or v[k:] != u:
        return None
    vnodes, vlast = _chain(v[:k], "H", "X")
    if vnodes:
        vnodes[-1] = vnodes[-1].replace(f"${vlast})", "$E)")
        end = "[end]($E)"
    else:
        end = "[end]($H)"
    parts = ["[#]($H)"] + vnodes + [end]
    return (f"  rule {name} {{\n"
            f"    locator: [root{{ren={SUCCESS}}}]({', '.join(parts)});\n  }}")


def gen_pcp(pairs) -> PcpFiles:
    """System whose runs spell out partial solutions of a PCP instance.

    A state holds the top word U as a chain of position nodes under the root,
    each carrying the two values it shares with its neighbours. ``[#](d)``
    holds the value where the bottom word V stops and ``[end](d)`` the value
    closing U. Positions already spelled by V carry the tag ``v.<letter>``,
    which pins the direction in which a chain is read from ``#``. Pair i < n
    checks v_i against U right after the ``#`` value, marks those positions
    covered, moves ``#`` past them and appends u_i behind ``end``. When the
    tail of v_i spills over the end of U it is checked against the head of
    u_i instead, which gets one extra rule per possible overlap. The last pair
    renames the root to the success tag when it closes both words at once.

    The instance is assumed to satisfy the usual restrictions: the first pair
    starts every solution and the last pair ends it, and V never gets ahead
    of U on a partial solution. They are not checked.
    """
    pairs = [(str(u), str(v)) for u, v in pairs]
    if not pairs:
        raise UsageError("empty PCP instance")
    u1, v1 = pairs[0]
    if not u1.startswith(v1) or u1 == v1:
        raise UsageError("the first pair must have v a proper prefix of u")
    letters = sorted({ch for u, v in pairs for ch in u + v})
    bad = [ch for ch in letters if not ch.isalpha()]
    if bad:
        raise UsageError(f"PCP letters must be alphabetic: {bad}")
    alphabet = ["root", SUCCESS, "#", "end"] + letters + [covered(ch) for ch in letters]
    positions = [f"[{covered(ch) if i < len(v1) else ch}](@{i}, @{i + 1})"
                 for i, ch in enumerate(u1)]
    init = f"[root]([#](@{len(v1)}), {', '.join(positions)}, [end](@{len(u1)}))"
    rules = []
    for i, (u, v) in enumerate(pairs[:-1], 1):
        for over in range(min(len(u), len(v)) + 1):
            if v[len(v) - over:] == u[:over]:
                rules.append(_pair_rule(f"pair{i}" + (f".{over}" if over else ""), u, v, over))
    final = _final_rule(f"pair{len(pairs)}", *pairs[-1])
    if final is not None:
        rules.append(final)
    text = "\n".join([
        "# generated from PCP pairs " + " ".join(f"({u},{v})" for u, v in pairs),
        "system pcp {",
        f"  alphabet: {', '.join(alphabet)};",
        "  dtd {",
        f"    root: root, {SUCCESS};",
        "  }",
        "  bounds { depth: 2; }",
        "  init {",
        f"    {init};",
        "  }",
        *rules,
        "}",
        "",
    ])
    return PcpFiles(text, f"[{SUCCESS}]\n")
