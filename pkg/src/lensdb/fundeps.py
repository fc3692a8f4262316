"""Functional-dependency algebra: closure, derivability, outputs, tree form.

A dependency ``X -> Y`` says rows agreeing on the attributes X agree on Y.
Derivability uses the standard attribute-closure fixpoint, which decides
the full inference system (the test suite cross-checks it against an
exhaustive rule-saturation oracle on small universes).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


class FunDepError(Exception):
    pass


class UnknownAttributeError(FunDepError):
    def __init__(self, attrs):
        super().__init__(f"unknown attributes {sorted(attrs)}")
        self.attrs = frozenset(attrs)


@dataclass(frozen=True)
class FunDep:
    lhs: frozenset[str]
    rhs: frozenset[str]

    def __post_init__(self):
        if not self.lhs or not self.rhs:
            raise FunDepError("functional dependency sides must be nonempty")
        object.__setattr__(self, "lhs", frozenset(self.lhs))
        object.__setattr__(self, "rhs", frozenset(self.rhs))

    @property
    def attrs(self) -> frozenset[str]:
        return self.lhs | self.rhs

    def __str__(self) -> str:
        return f"{' '.join(sorted(self.lhs))} -> {' '.join(sorted(self.rhs))}"


@dataclass(frozen=True)
class FunDeps:
    deps: frozenset[FunDep]
    universe: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "deps", frozenset(self.deps))
        object.__setattr__(self, "universe", frozenset(self.universe))
        stray = {a for d in self.deps for a in d.attrs} - self.universe
        if stray:
            raise UnknownAttributeError(stray)

    def __str__(self) -> str:
        return render_fds(self)


def fundeps(deps: Iterable[FunDep], universe: Iterable[str]) -> FunDeps:
    return FunDeps(frozenset(deps), frozenset(universe))


def empty_fds(universe: Iterable[str]) -> FunDeps:
    return FunDeps(frozenset(), frozenset(universe))


def closure(fds: FunDeps, attrs: Iterable[str]) -> frozenset[str]:
    """Largest attribute set derivable from ``attrs``: the usual fixpoint."""
    attrs = frozenset(attrs)
    stray = attrs - fds.universe
    if stray:
        raise UnknownAttributeError(stray)
    out = set(attrs)
    changed = True
    while changed:
        changed = False
        for d in fds.deps:
            if d.lhs <= out and not d.rhs <= out:
                out |= d.rhs
                changed = True
    return frozenset(out)


def derives(fds: FunDeps, dep: FunDep) -> bool:
    stray = dep.attrs - fds.universe
    if stray:
        raise UnknownAttributeError(stray)
    return dep.rhs <= closure(fds, dep.lhs)


def outputs(fds: FunDeps) -> frozenset[str]:
    """Attributes nontrivially determined by some dependency's left side."""
    out: set[str] = set()
    for d in fds.deps:
        out |= closure(fds, d.lhs) - d.lhs
    return frozenset(out)


def equivalent(f: FunDeps, g: FunDeps) -> bool:
    """Mutual derivability of every dependency."""
    universe = f.universe | g.universe
    f2 = FunDeps(f.deps, universe)
    g2 = FunDeps(g.deps, universe)
    return (all(derives(g2, d) for d in f.deps)
            and all(derives(f2, d) for d in g.deps))


def union(f: FunDeps, g: FunDeps) -> FunDeps:
    return FunDeps(f.deps | g.deps, f.universe | g.universe)


# ---------------------------------------------------------------------------
# Tree form
# ---------------------------------------------------------------------------

def _canonical_deps(fds: FunDeps) -> dict[frozenset[str], frozenset[str]]:
    """Merge by left side and strip trivially self-determined attributes."""
    merged: dict[frozenset[str], set[str]] = {}
    for d in fds.deps:
        merged.setdefault(d.lhs, set()).update(d.rhs)
    out = {}
    for lhs, rhs in merged.items():
        rhs = frozenset(rhs) - lhs
        if rhs:
            out[lhs] = rhs
    return out


def tree_form_nodes(fds: FunDeps):
    """Canonical node partition and edges, or None if no forest exists.

    Nodes are the merged left sides plus groups of non-determining
    attributes split by their (unique) determining left side.  Returns
    ``(nodes, edges)`` with edges as (parent node, child node) pairs.
    """
    merged = _canonical_deps(fds)
    lhs_attrs = {a for lhs in merged for a in lhs}

    # left sides must not partially overlap each other
    lhss = list(merged)
    for i, a in enumerate(lhss):
        for b in lhss[i + 1:]:
            if a & b and a != b:
                return None

    # group the remaining attributes by their determining left side
    determiner: dict[str, frozenset[str]] = {}
    for lhs, rhs in merged.items():
        for attr in rhs - lhs_attrs:
            if attr in determiner and determiner[attr] != lhs:
                return None  # two incoming edges
            determiner[attr] = lhs
    groups: dict[frozenset[str], set[str]] = {}
    for attr, lhs in determiner.items():
        groups.setdefault(lhs, set()).add(attr)

    nodes = set(merged) | {frozenset(g) for g in groups.values()}
    edges = set()
    for lhs, rhs in merged.items():
        for node in nodes:
            hit = node & rhs
            if not hit:
                continue
            if not node <= rhs:
                return None  # dependency covers only part of a node
            edges.add((lhs, node))

    incoming: dict[frozenset[str], int] = {}
    for _, child in edges:
        incoming[child] = incoming.get(child, 0) + 1
        if incoming[child] > 1:
            return None

    # acyclicity: follow the unique parent pointers
    parent = {child: par for par, child in edges}
    for start in nodes:
        seen = set()
        node = start
        while node in parent:
            if node in seen:
                return None
            seen.add(node)
            node = parent[node]
    return nodes, edges


def is_tree_form(fds: FunDeps) -> bool:
    """True iff the canonicalised dependency graph is a forest."""
    return tree_form_nodes(fds) is not None


def tree_order(fds: FunDeps) -> list[tuple[frozenset[str], frozenset[str]]]:
    """Canonical dependencies in root-to-leaf order (deterministic)."""
    shape = tree_form_nodes(fds)
    if shape is None:
        raise FunDepError(f"dependencies are not in tree form: {fds}")
    merged = _canonical_deps(fds)
    parent = {child: par for par, child in shape[1]}

    def depth(lhs: frozenset[str]) -> int:
        d, node = 0, lhs
        while node in parent:
            node = parent[node]
            d += 1
        return d

    ordered = sorted(merged, key=lambda lhs: (depth(lhs), tuple(sorted(lhs))))
    return [(lhs, merged[lhs]) for lhs in ordered]


def remove_output(fds: FunDeps, label: str) -> FunDeps | None:
    """Drop ``label`` from every right side; None if it determines anything."""
    if any(label in d.lhs for d in fds.deps):
        return None
    deps = set()
    for d in fds.deps:
        rhs = d.rhs - {label}
        if rhs:
            deps.add(FunDep(d.lhs, rhs))
    return FunDeps(frozenset(deps), fds.universe - {label})


# ---------------------------------------------------------------------------
# Text form: ``a b -> c d`` with multiple dependencies separated by ';'
# ---------------------------------------------------------------------------

def parse_fds(text: str, universe: Iterable[str]) -> FunDeps:
    universe = frozenset(universe)
    deps = set()
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "->" not in part:
            raise FunDepError(f"expected 'lhs -> rhs' in {part!r}")
        lhs_text, rhs_text = part.split("->", 1)
        lhs = frozenset(lhs_text.split())
        rhs = frozenset(rhs_text.split())
        if not lhs or not rhs:
            raise FunDepError(f"empty side in dependency {part!r}")
        deps.add(FunDep(lhs, rhs))
    return FunDeps(frozenset(deps), universe)


def render_fds(fds: FunDeps) -> str:
    rendered = sorted(str(d) for d in fds.deps)
    return "; ".join(rendered)
