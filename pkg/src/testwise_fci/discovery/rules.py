"""Orientation rules R1-R10 for partial ancestral graphs.

Each rule scans the graph in lexicographic vertex order, applies every
instance it finds, and reports whether anything changed.  ``orient`` runs the
enabled rules in ascending number until a full pass changes nothing.

In RFCI mode the discriminating-path rule first re-checks, for every pair of
consecutive path vertices, that the pair stays dependent given each subset of
the stored separating set of the path's endpoints; a failed check deletes the
edge instead of orienting.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterator

from ..citest import CITester
from ..graph import ARROW, CIRCLE, TAIL, MixedGraph, SepsetMap


@dataclass
class RuleContext:
    g: MixedGraph
    sepsets: SepsetMap
    ci: CITester | None = None
    rfci: bool = False
    max_cond_size: int | None = None
    stats: dict = field(default_factory=lambda: {"rfci_r4_removed": 0, "rfci_r4_truncated": 0})


def _is_parent(g: MixedGraph, a: int, b: int) -> bool:
    return g.mark(a, b) == ARROW and g.mark(b, a) == TAIL


def _pd_edge(g: MixedGraph, u: int, v: int) -> bool:
    """Edge u-v could be oriented u -> v: no arrowhead at u, no tail at v."""
    return g.mark(v, u) != ARROW and g.mark(u, v) != TAIL


def _uncovered_paths(g: MixedGraph, start: int, second: int, end: int,
                     edge_ok: Callable[[int, int], bool]) -> Iterator[list[int]]:
    """Uncovered paths ``start, second, ..., end`` whose edges all satisfy ``edge_ok``."""
    if not edge_ok(start, second):
        return
    if second == end:
        yield [start, end]
        return
    stack = [[start, second]]
    while stack:
        path = stack.pop()
        u, v = path[-2], path[-1]
        for w in sorted(g.neighbors(v), reverse=True):
            if w in path or g.has_edge(u, w) or not edge_ok(v, w):
                continue
            if w == end:
                yield path + [w]
            else:
                stack.append(path + [w])


def rule1(ctx: RuleContext) -> bool:
    g, changed = ctx.g, False
    for b in range(g.n):
        for a in g.neighbors(b):
            if g.mark(a, b) != ARROW:
                continue
            for c in g.neighbors(b):
                if c != a and not g.has_edge(a, c) and g.mark(c, b) == CIRCLE:
                    g.set_mark(c, b, TAIL)
                    g.set_mark(b, c, ARROW)
                    changed = True
    return changed


def rule2(ctx: RuleContext) -> bool:
    g, changed = ctx.g, False
    for a in range(g.n):
        for c in g.neighbors(a):
            if g.mark(a, c) != CIRCLE:
                continue
            for b in g.neighbors(a):
                if b == c or not g.has_edge(b, c):
                    continue
                if (_is_parent(g, a, b) and g.mark(b, c) == ARROW) or (
                    g.mark(a, b) == ARROW and _is_parent(g, b, c)
                ):
                    g.set_mark(a, c, ARROW)
                    changed = True
                    break
    return changed


def rule3(ctx: RuleContext) -> bool:
    g, changed = ctx.g, False
    for b in range(g.n):
        into_b = [v for v in g.neighbors(b) if g.mark(v, b) == ARROW]
        for a, c in combinations(into_b, 2):
            if g.has_edge(a, c):
                continue
            for t in g.neighbors(b):
                if t in (a, c) or not (g.has_edge(t, a) and g.has_edge(t, c)):
                    continue
                if g.mark(a, t) == CIRCLE and g.mark(c, t) == CIRCLE and g.mark(t, b) == CIRCLE:
                    g.set_mark(t, b, ARROW)
                    changed = True
    return changed


def discriminating_path(g: MixedGraph, a: int, b: int, c: int) -> list[int] | None:
    """Shortest discriminating path ``[d, ..., a, b, c]`` for ``b``, if any.

    Requires ``a -> c`` and an arrowhead at ``a`` on ``a-b``.
    """
    prev = {a: b}
    visited = {a, b, c}
    queue = deque([a])
    while queue:
        v = queue.popleft()
        for d in g.neighbors(v):
            if d in visited or g.mark(d, v) != ARROW:
                continue
            if not g.has_edge(d, c):
                path = [d, v]
                while path[-1] != b:
                    path.append(prev[path[-1]])
                return path + [c]
            if _is_parent(g, d, c) and g.mark(v, d) == ARROW:
                prev[d] = v
                visited.add(d)
                queue.append(d)
    return None


def _rfci_path_check(ctx: RuleContext, path: list[int]) -> bool:
    """True when every consecutive pair stays dependent; otherwise deletes one edge."""
    sep = ctx.sepsets.get(path[0], path[-1]) or ()
    for u, v in zip(path, path[1:]):
        rest = [w for w in sep if w not in (u, v)]
        top = len(rest)
        if ctx.max_cond_size is not None and top > ctx.max_cond_size:
            top = ctx.max_cond_size
            ctx.stats["rfci_r4_truncated"] += 1
        for k in range(top + 1):
            for Y in combinations(rest, k):
                if ctx.ci.independent(u, v, Y):
                    ctx.g.remove_edge(u, v)
                    ctx.sepsets.set(u, v, Y)
                    ctx.stats["rfci_r4_removed"] += 1
                    return False
    return True


def rule4(ctx: RuleContext) -> bool:
    g, changed = ctx.g, False
    for b in range(g.n):
        for c in g.neighbors(b):
            if g.mark(c, b) != CIRCLE:
                continue
            for a in g.neighbors(b):
                if a == c or not _is_parent(g, a, c) or g.mark(b, a) != ARROW:
                    continue
                path = discriminating_path(g, a, b, c)
                if path is None:
                    continue
                if ctx.rfci and not _rfci_path_check(ctx, path):
                    return True
                sep = ctx.sepsets.get(path[0], c) or ()
                if b in sep:
                    g.set_mark(c, b, TAIL)
                    g.set_mark(b, c, ARROW)
                else:
                    g.set_mark(a, b, ARROW)
                    g.set_mark(b, a, ARROW)
                    g.set_mark(c, b, ARROW)
                    g.set_mark(b, c, ARROW)
                changed = True
                break
    return changed


def rule5(ctx: RuleContext) -> bool:
    g, changed = ctx.g, False

    def circle(u, v):
        return g.mark(u, v) == CIRCLE and g.mark(v, u) == CIRCLE

    for a in range(g.n):
        for b in list(g.neighbors(a)):
            if b < a or not circle(a, b):
                continue
            for gamma in g.neighbors(a):
                if gamma == b or g.has_edge(gamma, b):
                    continue
                found = None
                for path in _uncovered_paths(g, a, gamma, b, circle):
                    if len(path) >= 4 and not g.has_edge(path[-2], a):
                        found = path
                        break
                if found:
                    g.set_edge(a, b, TAIL, TAIL)
                    for u, v in zip(found, found[1:]):
                        g.set_edge(u, v, TAIL, TAIL)
                    changed = True
                    break
    return changed


def rule6(ctx: RuleContext) -> bool:
    g, changed = ctx.g, False
    for b in range(g.n):
        if not any(g.mark(a, b) == TAIL and g.mark(b, a) == TAIL for a in g.neighbors(b)):
            continue
        for c in g.neighbors(b):
            if g.mark(c, b) == CIRCLE:
                g.set_mark(c, b, TAIL)
                changed = True
    return changed


def rule7(ctx: RuleContext) -> bool:
    g, changed = ctx.g, False
    for b in range(g.n):
        for a in g.neighbors(b):
            if not (g.mark(b, a) == TAIL and g.mark(a, b) == CIRCLE):
                continue
            for c in g.neighbors(b):
                if c != a and not g.has_edge(a, c) and g.mark(c, b) == CIRCLE:
                    g.set_mark(c, b, TAIL)
                    changed = True
    return changed


def _circle_arrow_edges(g: MixedGraph) -> list[tuple[int, int]]:
    """Pairs ``(a, c)`` with ``a o-> c``."""
    return [(a, c) for a in range(g.n) for c in g.neighbors(a)
            if g.mark(c, a) == CIRCLE and g.mark(a, c) == ARROW]


def rule8(ctx: RuleContext) -> bool:
    g, changed = ctx.g, False
    for a, c in _circle_arrow_edges(g):
        for b in g.neighbors(a):
            if b == c or not g.has_edge(b, c):
                continue
            if g.mark(b, a) == TAIL and g.mark(a, b) in (ARROW, CIRCLE) and _is_parent(g, b, c):
                g.set_mark(c, a, TAIL)
                changed = True
                break
    return changed


def rule9(ctx: RuleContext) -> bool:
    g, changed = ctx.g, False
    pd = lambda u, v: _pd_edge(g, u, v)  # noqa: E731
    for a, c in _circle_arrow_edges(g):
        for b in g.neighbors(a):
            if b == c or g.has_edge(b, c):
                continue
            if next(_uncovered_paths(g, a, b, c, pd), None) is not None:
                g.set_mark(c, a, TAIL)
                changed = True
                break
    return changed


def _pd_first_steps(g: MixedGraph, a: int, target: int) -> set[int]:
    pd = lambda u, v: _pd_edge(g, u, v)  # noqa: E731
    return {mu for mu in g.neighbors(a) if next(_uncovered_paths(g, a, mu, target, pd), None) is not None}


def rule10(ctx: RuleContext) -> bool:
    g, changed = ctx.g, False
    for a, c in _circle_arrow_edges(g):
        parents_c = [v for v in g.parents(c) if v != a]
        hit = False
        for b, t in combinations(parents_c, 2):
            firsts_b = _pd_first_steps(g, a, b)
            if not firsts_b:
                continue
            firsts_t = _pd_first_steps(g, a, t)
            if any(mu != om and not g.has_edge(mu, om) for mu in firsts_b for om in firsts_t):
                hit = True
                break
        if hit:
            g.set_mark(c, a, TAIL)
            changed = True
    return changed


RULES: dict[int, Callable[[RuleContext], bool]] = {
    1: rule1, 2: rule2, 3: rule3, 4: rule4, 5: rule5,
    6: rule6, 7: rule7, 8: rule8, 9: rule9, 10: rule10,
}


def orient(ctx: RuleContext, rule_set) -> int:
    """Apply the rules to a fixpoint; returns the number of passes that changed the graph."""
    passes = 0
    while True:
        changed = False
        for k in sorted(rule_set):
            changed |= RULES[k](ctx)
        if not changed:
            return passes
        passes += 1
