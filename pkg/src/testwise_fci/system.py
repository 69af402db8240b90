"""Ground-truth causal systems: a DAG plus the observed/latent/selection split.

Missingness is modelled as selection: each observed vertex ``O`` carries the
set of selection and missingness-indicator vertices that must all be "on" for
``O`` to be recorded.  List-wise deletion conditions on the union of all of
these sets; test-wise deletion only on the sets of the variables in one test.

Text format extends the graph format with::

    role <v> <O|L|S|M>
    indicator <o> <m>      # indicator vertex m governs observed vertex o
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .exceptions import InvalidArgumentError, InvalidGraphError
from .graph import (
    ARROW,
    TAIL,
    MixedGraph,
    ancestors,
    d_separated,
    descendants,
    graph_from_rows,
    graph_lines,
    parse_lines,
)


class Role(enum.Enum):
    OBSERVED = "O"
    LATENT = "L"
    SELECTION = "S"
    INDICATOR = "M"


@dataclass(frozen=True)
class CausalSystem:
    dag: MixedGraph
    roles: tuple[Role, ...]
    indicator_map: Mapping[int, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.dag.kind != "dag":
            raise InvalidGraphError("a causal system needs a DAG")
        if len(self.roles) != self.dag.n:
            raise InvalidArgumentError("one role per vertex required")
        object.__setattr__(self, "dag", self.dag.frozen())
        object.__setattr__(self, "roles", tuple(Role(r) for r in self.roles))
        sel = self.selection
        full = {}
        for o in self.observed:
            extra = frozenset(self.indicator_map.get(o, ())) - sel
            full[o] = extra | sel
        for o in self.indicator_map:
            if o not in full:
                raise InvalidArgumentError(f"indicator_map key {o} is not an observed vertex")
        used = frozenset().union(*full.values()) - sel if full else frozenset()
        if used != self.indicators:
            raise InvalidArgumentError("indicator vertices must be exactly those governing some observable")
        object.__setattr__(self, "indicator_map", full)

    def _with_role(self, role: Role) -> list[int]:
        return [v for v, r in enumerate(self.roles) if r is role]

    @property
    def observed(self) -> list[int]:
        """Observed DAG vertices in ascending order; dataset column k is ``observed[k]``."""
        return self._with_role(Role.OBSERVED)

    @property
    def latent(self) -> list[int]:
        return self._with_role(Role.LATENT)

    @property
    def selection(self) -> frozenset[int]:
        return frozenset(self._with_role(Role.SELECTION))

    @property
    def indicators(self) -> frozenset[int]:
        return frozenset(self._with_role(Role.INDICATOR))

    @property
    def listwise_selection(self) -> frozenset[int]:
        """Union of every observable's indicator set."""
        return self.selection.union(*self.indicator_map.values())

    def selection_for(self, variables: Iterable[int]) -> frozenset[int]:
        """Union of the indicator sets of ``variables`` (observed DAG vertices)."""
        return self.selection.union(*(self.indicator_map[v] for v in variables))

    def mechanisms(self) -> list[frozenset[int]]:
        """Distinct non-empty indicator sets with the shared selection removed."""
        sel = self.selection
        out = {s - sel for s in self.indicator_map.values()} - {frozenset()}
        return sorted(out, key=sorted)


# -- inducing paths and the MAG projection ----------------------------------


def _check_observed_pair(sys: CausalSystem, oi: int, oj: int) -> None:
    obs = set(sys.observed)
    if oi not in obs or oj not in obs:
        raise InvalidArgumentError("inducing paths are defined between observed vertices")
    if oi == oj:
        raise InvalidArgumentError("endpoints must differ")


def has_inducing_path(sys: CausalSystem, oi: int, oj: int, selection: Iterable[int] | None = None) -> bool:
    """Whether an inducing path joins ``oi`` and ``oj`` relative to ``selection``.

    Everything that is neither observed nor selected counts as latent.  Uses
    the fact that such a path exists iff the pair stays d-connected given the
    observed ancestors of ``{oi, oj} | selection`` together with the selection.
    """
    _check_observed_pair(sys, oi, oj)
    sel = sys.selection if selection is None else frozenset(selection)
    anc = ancestors(sys.dag, {oi, oj} | sel)
    cond = ((anc & set(sys.observed)) - {oi, oj}) | sel
    return not d_separated(sys.dag, {oi}, {oj}, cond)


def dag_to_mag(sys: CausalSystem, selection: Iterable[int] | None = None) -> MixedGraph:
    """MAG over the observed vertices (re-indexed 0..k-1 in ascending order)."""
    sel = sys.selection if selection is None else frozenset(selection)
    obs = sys.observed
    mag = MixedGraph(len(obs), kind="mag")
    for a in range(len(obs)):
        for b in range(a + 1, len(obs)):
            oa, ob = obs[a], obs[b]
            if not has_inducing_path(sys, oa, ob, sel):
                continue
            mark_a = TAIL if oa in ancestors(sys.dag, {ob} | sel) else ARROW
            mark_b = TAIL if ob in ancestors(sys.dag, {oa} | sel) else ARROW
            mag.set_edge(a, b, mark_a, mark_b)
    return mag


def oracle_ci(sys: CausalSystem, oi: int, oj: int, W: Iterable[int], sel: Iterable[int] = ()) -> bool:
    """True when ``oi`` and ``oj`` are d-separated given ``W`` plus the selected vertices."""
    W, sel = set(W), set(sel)
    obs = set(sys.observed)
    if not W <= obs - {oi, oj}:
        raise InvalidArgumentError("conditioning set must hold observed vertices other than the pair")
    if not sel <= sys.selection | sys.indicators:
        raise InvalidArgumentError("sel may only contain selection or indicator vertices")
    return d_separated(sys.dag, {oi}, {oj}, W | sel)


# -- assumptions on the missingness mechanisms -------------------------------


def check_assumption1(sys: CausalSystem) -> bool:
    """No indicator causes an observable, a selection vertex, or another mechanism.

    Ancestry here means a directed path of length at least one, so an
    indicator shared by two overlapping mechanisms is not a violation.
    """
    protected = set(sys.observed) | sys.selection
    mechs = sys.mechanisms()
    for m in sys.indicators:
        below = descendants(sys.dag, [m]) - {m}
        if below & protected:
            return False
        for d in below & sys.indicators:
            if any(m in a and d in b for ka, a in enumerate(mechs) for kb, b in enumerate(mechs) if ka != kb):
                return False
    return True


def check_assumption2(sys: CausalSystem) -> bool:
    """MCAR reading: no path at all links an observable to a missingness indicator."""
    obs = set(sys.observed)
    seen = set(sys.indicators)
    stack = list(seen)
    while stack:
        v = stack.pop()
        if v in obs:
            return False
        for w in sys.dag.neighbors(v):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return True


# -- serialisation ------------------------------------------------------------


def system_to_text(sys: CausalSystem) -> str:
    lines = graph_lines(sys.dag)
    lines += [f"role {v} {r.value}" for v, r in enumerate(sys.roles)]
    sel = sys.selection
    for o in sys.observed:
        lines += [f"indicator {o} {m}" for m in sorted(sys.indicator_map[o] - sel)]
    return "\n".join(lines) + "\n"


def system_from_text(text: str) -> CausalSystem:
    rows = parse_lines(text)
    dag = graph_from_rows(rows, kind="dag")
    roles: list[Role | None] = [None] * dag.n
    imap: dict[int, set[int]] = {}
    for row in rows[1:]:
        if row[0] == "role":
            roles[int(row[1])] = Role(row[2])
        elif row[0] == "indicator":
            imap.setdefault(int(row[1]), set()).add(int(row[2]))
        elif row[0] != "edge":
            raise InvalidGraphError(f"unknown line type {row[0]!r}")
    if any(r is None for r in roles):
        raise InvalidGraphError("every vertex needs a role line")
    return CausalSystem(dag, tuple(roles), {k: frozenset(v) for k, v in imap.items()})
