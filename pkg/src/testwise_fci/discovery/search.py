"""FCI and RFCI over any :class:`~testwise_fci.citest.CITester`."""

from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import dataclass, field
from itertools import combinations

from ..citest import CITester
from ..graph import ARROW, CIRCLE, MixedGraph, SepsetMap, to_text, unshielded_triples
from .rules import RuleContext, orient

DEFAULT_RULES = frozenset({1, 2, 3, 4, 8, 9, 10})
SELECTION_RULES = frozenset({5, 6, 7})


@dataclass
class SearchOptions:
    max_cond_size: int | None = None
    stable_skeleton: bool = True
    rule_set: frozenset[int] = DEFAULT_RULES
    possible_dsep: bool = True
    mode: str = "FCI"

    def __post_init__(self):
        self.rule_set = frozenset(self.rule_set)
        if not self.rule_set <= set(range(1, 11)):
            raise ValueError("rules are numbered 1-10")
        if self.mode not in ("FCI", "RFCI"):
            raise ValueError("mode must be FCI or RFCI")

    @classmethod
    def with_selection_rules(cls, **kw) -> "SearchOptions":
        return cls(rule_set=DEFAULT_RULES | SELECTION_RULES, **kw)


@dataclass
class Pag:
    graph: MixedGraph
    sepsets: SepsetMap
    mode: str
    stats: dict = field(default_factory=dict)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Pag) and self.graph == other.graph

    def to_text(self) -> str:
        return to_text(self.graph)

    def summary(self, ci: CITester | None = None) -> dict:
        """JSON-ready description: edges with marks, sepsets, query counts."""
        out = {
            "mode": self.mode,
            "n_vertices": self.graph.n,
            "edges": [[i, j, a.symbol, b.symbol] for i, j, a, b in self.graph.edges()],
            "sepsets": [[i, j, list(s)] for (i, j), s in self.sepsets.items()],
            "stats": self.stats,
        }
        if ci is not None:
            out["ci_queries"] = dict(sorted(Counter(d.strategy.value for d in ci.log).items()))
        return out

    def summary_json(self, ci: CITester | None = None) -> str:
        return json.dumps(self.summary(ci), indent=2, sort_keys=True) + "\n"


# -- stages ----------------------------------------------------------------------


def skeleton(ci: CITester, p: int, opts: SearchOptions | None = None) -> tuple[MixedGraph, SepsetMap]:
    """Adjacency search with conditioning sets drawn from current neighbours."""
    opts = opts or SearchOptions()
    g = MixedGraph.complete(p, CIRCLE)
    sepsets = SepsetMap()
    k = 0
    while opts.max_cond_size is None or k <= opts.max_cond_size:
        frozen = {v: list(g.neighbors(v)) for v in range(p)} if opts.stable_skeleton else None
        testable = False
        for i in range(p):
            for j in list(g.neighbors(i)):
                if not g.has_edge(i, j):
                    continue
                adj = frozen[i] if frozen is not None else g.neighbors(i)
                cand = [v for v in adj if v != j]
                if len(cand) < k:
                    continue
                testable = True
                for W in combinations(cand, k):
                    if ci.independent(i, j, W):
                        g.remove_edge(i, j)
                        sepsets.set(i, j, W)
                        break
        if not testable:
            break
        k += 1
    return g, sepsets


def _orient_colliders(g: MixedGraph, triples) -> None:
    for i, k, j in triples:
        g.set_mark(i, k, ARROW)
        g.set_mark(j, k, ARROW)


def fci_vstructures(g: MixedGraph, sepsets: SepsetMap) -> MixedGraph:
    """Orient ``i *-> k <-* j`` for unshielded triples with k outside sepset(i, j)."""
    hits = []
    for i, k, j in unshielded_triples(g):
        sep = sepsets.get(i, j)
        if sep is not None and k not in sep:
            hits.append((i, k, j))
    _orient_colliders(g, hits)
    return g


def _minimal_separator(ci: CITester, a: int, b: int, within) -> tuple[int, ...]:
    for k in range(len(within) + 1):
        for Y in combinations(within, k):
            if ci.independent(a, b, Y):
                return Y
    return tuple(within)


def rfci_vstructures(g: MixedGraph, sepsets: SepsetMap, ci: CITester) -> tuple[MixedGraph, int]:
    """Collider orientation with RFCI's extra dependence checks.

    Before orienting ``<i, k, j>`` both ``i, k`` and ``j, k`` must remain
    dependent given sepset(i, j); a pair that turns out independent loses its
    edge (with a minimal separating subset stored) and any newly unshielded
    triples are queued.  Returns the graph and the number of removed edges.
    """
    pending = deque(unshielded_triples(g))
    queued = set(pending)
    colliders = []
    removed = 0
    while pending:
        i, k, j = pending.popleft()
        if not (g.has_edge(i, k) and g.has_edge(k, j)) or g.has_edge(i, j):
            continue
        sep = sepsets.get(i, j)
        if sep is None or k in sep:
            continue
        dropped = False
        for a in (i, j):
            if ci.independent(a, k, sep):
                sepsets.set(a, k, _minimal_separator(ci, a, k, sep))
                g.remove_edge(a, k)
                removed += 1
                dropped = True
        if not dropped:
            colliders.append((i, k, j))
            continue
        for t in unshielded_triples(g):
            if t not in queued:
                queued.add(t)
                pending.append(t)
    live = [(i, k, j) for i, k, j in colliders
            if g.has_edge(i, k) and g.has_edge(k, j) and not g.has_edge(i, j)]
    _orient_colliders(g, live)
    return g, removed


def possible_dsep(g: MixedGraph, x: int) -> set[int]:
    """Vertices reachable from x along paths whose every inner triple is a collider or a triangle."""
    out = set()
    seen = set()
    queue = deque()
    for y in g.neighbors(x):
        out.add(y)
        seen.add((x, y))
        queue.append((x, y))
    while queue:
        u, v = queue.popleft()
        for w in g.neighbors(v):
            if w in (u, x) or (v, w) in seen:
                continue
            if g.has_edge(u, w) or (g.mark(u, v) == ARROW and g.mark(w, v) == ARROW):
                seen.add((v, w))
                out.add(w)
                queue.append((v, w))
    return out


def possible_dsep_stage(g: MixedGraph, ci: CITester, sepsets: SepsetMap,
                        opts: SearchOptions | None = None) -> tuple[MixedGraph, SepsetMap, int]:
    """Second round of edge removal with sets from Possible-D-SEP; re-orients from scratch.

    Returns the graph, sepsets and number of edges removed.  A no-op in RFCI mode.
    """
    opts = opts or SearchOptions()
    if opts.mode == "RFCI":
        return g, sepsets, 0
    pds = {x: sorted(possible_dsep(g, x)) for x in range(g.n)}
    removed = 0
    for x in range(g.n):
        for y in list(g.neighbors(x)):
            if y < x or not g.has_edge(x, y):
                continue
            for a, b in ((x, y), (y, x)):
                cand = [v for v in pds[a] if v not in (a, b)]
                top = len(cand) if opts.max_cond_size is None else min(len(cand), opts.max_cond_size)
                W = next((W for k in range(top + 1) for W in combinations(cand, k)
                          if ci.independent(a, b, W)), None)
                if W is not None:
                    g.remove_edge(a, b)
                    sepsets.set(a, b, W)
                    removed += 1
                    break
    for i, j, _, _ in list(g.edges()):
        g.set_edge(i, j, CIRCLE, CIRCLE)
    fci_vstructures(g, sepsets)
    return g, sepsets, removed


def orientation_rules(g: MixedGraph, sepsets: SepsetMap, ci: CITester | None,
                      opts: SearchOptions | None = None) -> tuple[MixedGraph, dict]:
    opts = opts or SearchOptions()
    ctx = RuleContext(g, sepsets, ci, rfci=opts.mode == "RFCI", max_cond_size=opts.max_cond_size)
    passes = orient(ctx, opts.rule_set)
    ctx.stats["rule_passes"] = passes
    return g, ctx.stats


# -- algorithms ------------------------------------------------------------------


def fci(ci: CITester, p: int | None = None, opts: SearchOptions | None = None) -> Pag:
    opts = opts or SearchOptions()
    if opts.mode != "FCI":
        opts = SearchOptions(**{**opts.__dict__, "mode": "FCI"})
    p = ci.p if p is None else p
    g, sepsets = skeleton(ci, p, opts)
    fci_vstructures(g, sepsets)
    removed = 0
    if opts.possible_dsep:
        g, sepsets, removed = possible_dsep_stage(g, ci, sepsets, opts)
    g, stats = orientation_rules(g, sepsets, ci, opts)
    stats["pdsep_removed"] = removed
    return Pag(g, sepsets, "FCI", stats)


def rfci(ci: CITester, p: int | None = None, opts: SearchOptions | None = None) -> Pag:
    opts = opts or SearchOptions()
    if opts.mode != "RFCI":
        opts = SearchOptions(**{**opts.__dict__, "mode": "RFCI"})
    p = ci.p if p is None else p
    g, sepsets = skeleton(ci, p, opts)
    g, removed = rfci_vstructures(g, sepsets, ci)
    g, stats = orientation_rules(g, sepsets, ci, opts)
    stats["vstructure_removed"] = removed
    return Pag(g, sepsets, "RFCI", stats)


ALGORITHMS = {"FCI": fci, "RFCI": rfci}
