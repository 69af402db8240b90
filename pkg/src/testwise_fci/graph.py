"""Endpoint-marked graphs and the separation queries defined on them.

One :class:`MixedGraph` type carries DAGs, MAGs and PAGs. Vertices are the
dense integers ``0..n-1``; the mark stored for the ordered pair ``(i, j)`` is
the endpoint mark *at j* on the edge between ``i`` and ``j``.  So
``g.mark(a, b) is ARROW`` reads as ``a *-> b``.

Text format (one item per line, ``#`` starts a comment)::

    p <n>
    edge <i> <j> <mark at i> <mark at j>     marks in {t, a, c}

Edges are written with ``i < j`` in lexicographic order, which makes
``to_text(from_text(s)) == s`` for any text produced by :func:`to_text`.
"""

from __future__ import annotations

import enum
from collections import deque
from itertools import combinations
from typing import Iterable, Iterator

import numpy as np

from .exceptions import InvalidArgumentError, InvalidGraphError


class EndpointMark(enum.IntEnum):
    TAIL = 1
    ARROW = 2
    CIRCLE = 3

    @property
    def symbol(self) -> str:
        return _MARK_TO_CHAR[self]

    @classmethod
    def from_symbol(cls, ch: str) -> "EndpointMark":
        try:
            return _CHAR_TO_MARK[ch]
        except KeyError:
            raise InvalidGraphError(f"unknown endpoint mark {ch!r}") from None


TAIL = EndpointMark.TAIL
ARROW = EndpointMark.ARROW
CIRCLE = EndpointMark.CIRCLE

_MARK_TO_CHAR = {TAIL: "t", ARROW: "a", CIRCLE: "c"}
_CHAR_TO_MARK = {v: k for k, v in _MARK_TO_CHAR.items()}

GRAPH_KINDS = ("dag", "mag", "pag")


class MixedGraph:
    """Graph with at most one edge per vertex pair and a mark at each end.

    ``kind`` is a flag ("dag", "mag" or "pag") checked by operations that only
    make sense for one family; :meth:`validate` checks the flag against the
    structure.
    """

    def __init__(self, n: int, kind: str = "pag"):
        if n < 1:
            raise InvalidArgumentError("a graph needs at least one vertex")
        if kind not in GRAPH_KINDS:
            raise InvalidArgumentError(f"unknown graph kind {kind!r}")
        self.n = int(n)
        self.kind = kind
        self._marks = np.zeros((self.n, self.n), dtype=np.int8)
        self._adj: list[list[int]] | None = None
        self._family: tuple[list[list[int]], list[list[int]]] | None = None

    # -- construction ---------------------------------------------------

    @classmethod
    def from_directed_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "MixedGraph":
        """Build a DAG from ``(parent, child)`` pairs; raises on cycles."""
        g = cls(n, kind="dag")
        for a, b in edges:
            g.set_edge(a, b, TAIL, ARROW)
        g.validate()
        return g

    @classmethod
    def from_weights(cls, weights: np.ndarray, tol: float = 0.0) -> "MixedGraph":
        """DAG from a SEM coefficient matrix where ``weights[i, r] != 0`` means r -> i."""
        w = np.asarray(weights)
        child, parent = np.nonzero(np.abs(w) > tol)
        return cls.from_directed_edges(w.shape[0], zip(parent.tolist(), child.tolist()))

    @classmethod
    def complete(cls, n: int, mark: EndpointMark = CIRCLE) -> "MixedGraph":
        g = cls(n, kind="pag")
        g._marks[:] = int(mark)
        np.fill_diagonal(g._marks, 0)
        return g

    def copy(self, kind: str | None = None) -> "MixedGraph":
        g = MixedGraph(self.n, kind or self.kind)
        g._marks = self._marks.copy()
        return g

    def frozen(self) -> "MixedGraph":
        """Read-only copy; any later mutation raises ``ValueError``."""
        g = self.copy()
        g._marks.setflags(write=False)
        return g

    # -- edge access ----------------------------------------------------

    def _check_pair(self, i: int, j: int) -> None:
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise InvalidArgumentError(f"vertex out of range: ({i}, {j})")
        if i == j:
            raise InvalidGraphError("self-loops are not allowed")

    def set_edge(self, i: int, j: int, mark_i: EndpointMark, mark_j: EndpointMark) -> None:
        self._check_pair(i, j)
        self._marks[j, i] = int(mark_i)
        self._marks[i, j] = int(mark_j)
        self._adj = self._family = None

    def set_mark(self, i: int, j: int, mark: EndpointMark) -> None:
        """Set the mark at ``j`` on the existing edge ``i *-* j``."""
        if not self._marks[i, j]:
            raise InvalidGraphError(f"no edge between {i} and {j}")
        self._marks[i, j] = int(mark)
        self._family = None

    def remove_edge(self, i: int, j: int) -> None:
        self._marks[i, j] = 0
        self._marks[j, i] = 0
        self._adj = self._family = None

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self._marks[i, j])

    def mark(self, i: int, j: int) -> EndpointMark | None:
        m = int(self._marks[i, j])
        return EndpointMark(m) if m else None

    def edge(self, i: int, j: int) -> tuple[EndpointMark, EndpointMark] | None:
        """Marks ``(at i, at j)`` or None; ``edge(j, i)`` is the mirror."""
        if not self._marks[i, j]:
            return None
        return EndpointMark(int(self._marks[j, i])), EndpointMark(int(self._marks[i, j]))

    def neighbors(self, i: int) -> list[int]:
        if self._adj is None:
            self._adj = [np.flatnonzero(row).tolist() for row in self._marks]
        return self._adj[i]

    def edges(self) -> Iterator[tuple[int, int, EndpointMark, EndpointMark]]:
        """Yield ``(i, j, mark_at_i, mark_at_j)`` for every edge with ``i < j``."""
        ii, jj = np.nonzero(np.triu(self._marks))
        for i, j in zip(ii.tolist(), jj.tolist()):
            yield i, j, EndpointMark(int(self._marks[j, i])), EndpointMark(int(self._marks[i, j]))

    def num_edges(self) -> int:
        return int(np.count_nonzero(self._marks)) // 2

    def is_directed(self, i: int, j: int) -> bool:
        """True for ``i -> j``."""
        return self._marks[i, j] == ARROW and self._marks[j, i] == TAIL

    def _directed_family(self) -> tuple[list[list[int]], list[list[int]]]:
        if self._family is None:
            directed = (self._marks == ARROW) & (self._marks.T == TAIL)  # [i, j]: i -> j
            self._family = (
                [np.flatnonzero(directed[:, v]).tolist() for v in range(self.n)],
                [np.flatnonzero(directed[v]).tolist() for v in range(self.n)],
            )
        return self._family

    def parents(self, i: int) -> list[int]:
        return self._directed_family()[0][i]

    def children(self, i: int) -> list[int]:
        return self._directed_family()[1][i]

    def skeleton(self) -> np.ndarray:
        return self._marks != 0

    def mark_matrix(self) -> np.ndarray:
        """Copy of the ``n x n`` matrix of marks; entry ``[i, j]`` is the mark at j."""
        return self._marks.copy()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self._marks, other._marks)

    def __hash__(self) -> int:
        return hash((self.n, self._marks.tobytes()))

    def __repr__(self) -> str:
        body = ", ".join(f"{i}{_EDGE_STR[(a, b)]}{j}" for i, j, a, b in self.edges())
        return f"MixedGraph(n={self.n}, kind={self.kind!r}, [{body}])"

    # -- structural checks ----------------------------------------------

    def directed_ancestors(self, seed: Iterable[int]) -> set[int]:
        """Vertices with a directed path into ``seed`` (reflexive); any kind."""
        out = set(seed)
        stack = list(out)
        while stack:
            v = stack.pop()
            for u in self.parents(v):
                if u not in out:
                    out.add(u)
                    stack.append(u)
        return out

    def has_directed_cycle(self) -> bool:
        indeg = [len(self.parents(v)) for v in range(self.n)]
        queue = deque(v for v in range(self.n) if indeg[v] == 0)
        seen = 0
        while queue:
            v = queue.popleft()
            seen += 1
            for c in self.children(v):
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        return seen != self.n

    def is_ancestral(self) -> bool:
        """No directed cycle, no almost directed cycle, undirected ends free of arrows."""
        m = self._marks
        if np.any(m == CIRCLE) or self.has_directed_cycle():
            return False
        for i, j, a, b in self.edges():
            if a == ARROW and b == ARROW:
                if j in self.directed_ancestors([i]) or i in self.directed_ancestors([j]):
                    return False
            elif a == TAIL and b == TAIL:
                for v in (i, j):
                    if np.any(m[:, v] == ARROW):
                        return False
        return True

    def validate(self) -> None:
        """Raise :class:`InvalidGraphError` unless the structure matches ``kind``."""
        m = self._marks
        if np.any(np.diag(m)):
            raise InvalidGraphError("self-loop present")
        if not np.array_equal(m != 0, (m != 0).T):
            raise InvalidGraphError("marks are not mirrored")
        if self.kind == "dag":
            for i, j, a, b in self.edges():
                if {a, b} != {TAIL, ARROW}:
                    raise InvalidGraphError(f"DAG edge {i}-{j} is not directed")
            if self.has_directed_cycle():
                raise InvalidGraphError("DAG contains a directed cycle")
        elif self.kind == "mag" and not self.is_ancestral():
            raise InvalidGraphError("graph is not ancestral")


_EDGE_STR = {
    (TAIL, ARROW): "-->", (ARROW, TAIL): "<--", (ARROW, ARROW): "<->",
    (TAIL, TAIL): "---", (CIRCLE, ARROW): "o->", (ARROW, CIRCLE): "<-o",
    (CIRCLE, TAIL): "o--", (TAIL, CIRCLE): "--o", (CIRCLE, CIRCLE): "o-o",
}


class SepsetMap:
    """Separating sets per unordered pair, as found during skeleton search."""

    def __init__(self):
        self._sets: dict[tuple[int, int], tuple[int, ...]] = {}

    @staticmethod
    def _key(i: int, j: int) -> tuple[int, int]:
        return (i, j) if i < j else (j, i)

    def set(self, i: int, j: int, sepset: Iterable[int]) -> None:
        s = tuple(sepset)
        if i in s or j in s:
            raise InvalidArgumentError("a separating set cannot contain its endpoints")
        self._sets[self._key(i, j)] = s

    def get(self, i: int, j: int) -> tuple[int, ...] | None:
        """Stored set, or None when no separating set was found."""
        return self._sets.get(self._key(i, j))

    def __contains__(self, pair: tuple[int, int]) -> bool:
        return self._key(*pair) in self._sets

    def discard(self, i: int, j: int) -> None:
        self._sets.pop(self._key(i, j), None)

    def items(self):
        return sorted(self._sets.items())

    def copy(self) -> "SepsetMap":
        out = SepsetMap()
        out._sets = dict(self._sets)
        return out

    def __len__(self) -> int:
        return len(self._sets)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SepsetMap) and self._sets == other._sets


# -- ancestry and separation ----------------------------------------------


def ancestors(g: MixedGraph, seed: Iterable[int]) -> set[int]:
    """An(seed) in a DAG, including ``seed`` itself."""
    if g.kind != "dag":
        raise InvalidGraphError("ancestors() expects a DAG-flagged graph")
    return g.directed_ancestors(seed)


def descendants(g: MixedGraph, seed: Iterable[int]) -> set[int]:
    if g.kind != "dag":
        raise InvalidGraphError("descendants() expects a DAG-flagged graph")
    out = set(seed)
    stack = list(out)
    while stack:
        v = stack.pop()
        for c in g.children(v):
            if c not in out:
                out.add(c)
                stack.append(c)
    return out


def _check_disjoint(A: set[int], B: set[int], C: set[int]) -> None:
    if A & B or A & C or B & C:
        raise InvalidArgumentError("A, B and C must be pairwise disjoint")
    if not A or not B:
        raise InvalidArgumentError("A and B must be non-empty")


def d_separated(g: MixedGraph, A: Iterable[int], B: Iterable[int], C: Iterable[int] = ()) -> bool:
    """True iff every path between A and B is blocked by C in the DAG ``g``.

    Reachability over (vertex, direction) states, linear in the graph size.
    """
    A, B, C = set(A), set(B), set(C)
    _check_disjoint(A, B, C)
    anc_c = ancestors(g, C)
    # direction: True = arrived from a child (moving up), False = from a parent
    frontier = [(a, True) for a in A]
    seen = set(frontier)
    while frontier:
        v, up = frontier.pop()
        if v in B:
            return False
        nxt = []
        if up and v not in C:
            nxt += [(p, True) for p in g.parents(v)]
            nxt += [(c, False) for c in g.children(v)]
        elif not up:
            if v not in C:
                nxt += [(c, False) for c in g.children(v)]
            if v in anc_c:
                nxt += [(p, True) for p in g.parents(v)]
        for s in nxt:
            if s not in seen:
                seen.add(s)
                frontier.append(s)
    return True


def m_separated(g: MixedGraph, A: Iterable[int], B: Iterable[int], C: Iterable[int] = ()) -> bool:
    """Separation in an ancestral graph (DAGs included).

    A vertex is a collider when both incident path edges carry an arrowhead at
    it; colliders must be ancestors of C and non-colliders must lie outside C.
    """
    A, B, C = set(A), set(B), set(C)
    _check_disjoint(A, B, C)
    anc_c = g.directed_ancestors(C)
    m = g._marks
    # state: (vertex, arrowhead at vertex on the edge we arrived by)
    frontier = list({(w, bool(m[a, w] == ARROW)) for a in A for w in g.neighbors(a) if w not in A})
    seen = set(frontier)
    while frontier:
        v, head = frontier.pop()
        if v in B:
            return False
        for w in g.neighbors(v):
            if w in A:
                continue
            collider = head and m[w, v] == ARROW
            if collider and v not in anc_c:
                continue
            if not collider and v in C:
                continue
            s = (w, bool(m[v, w] == ARROW))
            if s not in seen:
                seen.add(s)
                frontier.append(s)
    return True


def simple_paths(g: MixedGraph, a: int, b: int) -> Iterator[list[int]]:
    """Every simple path from a to b over the skeleton (exponential)."""
    stack = [(a, [a])]
    while stack:
        v, path = stack.pop()
        for w in g.neighbors(v):
            if w == b:
                yield path + [w]
            elif w not in path:
                stack.append((w, path + [w]))


def path_is_active(g: MixedGraph, path: list[int], C: set[int], anc_c: set[int]) -> bool:
    for k in range(1, len(path) - 1):
        u, v, w = path[k - 1], path[k], path[k + 1]
        collider = g.mark(u, v) == ARROW and g.mark(w, v) == ARROW
        if collider and v not in anc_c:
            return False
        if not collider and v in C:
            return False
    return True


def d_separated_paths(g: MixedGraph, A: Iterable[int], B: Iterable[int], C: Iterable[int] = ()) -> bool:
    """Separation by enumerating every simple path; slow, kept as a cross-check.

    Works for DAGs and ancestral graphs alike.
    """
    A, B, C = set(A), set(B), set(C)
    _check_disjoint(A, B, C)
    anc_c = g.directed_ancestors(C)
    for a in sorted(A):
        for b in sorted(B):
            for path in simple_paths(g, a, b):
                if set(path[1:-1]) & (A | B):
                    continue
                if path_is_active(g, path, C, anc_c):
                    return False
    return True


def unshielded_triples(g: MixedGraph) -> list[tuple[int, int, int]]:
    """All ``(i, k, j)`` with ``i < j``, i-k-j adjacent and i, j non-adjacent."""
    out = []
    for k in range(g.n):
        for i, j in combinations(g.neighbors(k), 2):
            if not g.has_edge(i, j):
                out.append((i, k, j))
    out.sort()
    return out


# -- text serialisation -----------------------------------------------------


def graph_lines(g: MixedGraph) -> list[str]:
    lines = [f"p {g.n}"]
    lines += [f"edge {i} {j} {a.symbol} {b.symbol}" for i, j, a, b in g.edges()]
    return lines


def to_text(g: MixedGraph) -> str:
    return "\n".join(graph_lines(g)) + "\n"


def parse_lines(text: str) -> list[list[str]]:
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    return rows


def graph_from_rows(rows: list[list[str]], kind: str = "pag") -> MixedGraph:
    if not rows or rows[0][0] != "p" or len(rows[0]) != 2:
        raise InvalidGraphError("graph text must start with 'p <n>'")
    g = MixedGraph(int(rows[0][1]), kind=kind)
    for row in rows[1:]:
        if row[0] != "edge":
            continue
        if len(row) != 5:
            raise InvalidGraphError(f"malformed edge line: {' '.join(row)}")
        i, j = int(row[1]), int(row[2])
        if g.has_edge(i, j):
            raise InvalidGraphError(f"duplicate edge {i}-{j}")
        g.set_edge(i, j, EndpointMark.from_symbol(row[3]), EndpointMark.from_symbol(row[4]))
    g.validate()
    return g


def from_text(text: str, kind: str = "pag") -> MixedGraph:
    return graph_from_rows(parse_lines(text), kind=kind)
