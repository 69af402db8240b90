"""Conditional-independence decisions over incomplete data.

Every strategy returns a :class:`CIDecision`; a :class:`CITester` wraps one
strategy with memoisation and a log of the tests it actually executed.  The
discovery code only ever sees ``tester.decide(i, j, W)``.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import norm

from .exceptions import InvalidArgumentError
from .synth import Dataset
from .system import CausalSystem, oracle_ci

log = logging.getLogger(__name__)

R_CLAMP = 1.0 - 1e-12
COND_LIMIT = 1e12


class Strategy(str, enum.Enum):
    TESTWISE = "TestWise"
    LISTWISE = "ListWise"
    WRAPPER = "Wrapper"
    HEURISTIC = "Heuristic"
    ORACLE = "Oracle"


@dataclass(frozen=True)
class CIDecision:
    i: int
    j: int
    W: tuple[int, ...]
    strategy: Strategy
    effective_n: int | None
    p_value: float | None
    independent: bool
    degenerate: bool = False


LOG_COLUMNS = ("strategy", "i", "j", "W", "effective_n", "p_value", "independent", "degenerate_flag")


def testwise_rows(data: Dataset, variables: Iterable[int]) -> np.ndarray:
    """Ascending indices of rows where every variable in ``variables`` is recorded."""
    cols = sorted(set(variables))
    if not cols:
        raise InvalidArgumentError("need at least one variable")
    return np.flatnonzero(data.mask[:, cols].all(axis=1))


def partial_correlation(cov: np.ndarray, i: int, j: int, W: Sequence[int]) -> float:
    """Partial correlation of ``i`` and ``j`` given ``W`` from the precision matrix."""
    idx = [i, j, *W]
    sub = cov[np.ix_(idx, idx)]
    if np.linalg.cond(sub) <= COND_LIMIT:
        prec = np.linalg.inv(sub)
        r = -prec[0, 1] / math.sqrt(prec[0, 0] * prec[1, 1])
    else:
        # near-singular: residual covariance of (i, j) after regressing on W
        res = sub[:2, :2] - sub[:2, 2:] @ np.linalg.pinv(sub[2:, 2:]) @ sub[2:, :2]
        denom = math.sqrt(max(res[0, 0], 0.0) * max(res[1, 1], 0.0))
        if denom <= 1e-12 * max(sub[0, 0], sub[1, 1], 1e-300):
            return 0.0
        r = res[0, 1] / denom
    return float(np.clip(r, -R_CLAMP, R_CLAMP))


def fisher_z(cov: np.ndarray, effective_n: int, i: int, j: int, W: Sequence[int], alpha: float) -> tuple[float, bool]:
    """Two-sided Fisher z test of zero partial correlation; returns ``(p, independent)``.

    Indices refer to rows/columns of ``cov``.
    """
    dof = effective_n - len(W) - 3
    if dof <= 0:
        raise InvalidArgumentError("effective_n must exceed |W| + 3")
    r = partial_correlation(cov, i, j, W)
    z = 0.5 * math.log((1 + r) / (1 - r))
    p = float(2 * norm.sf(math.sqrt(dof) * abs(z)))
    return p, p >= alpha


# -- strategies ------------------------------------------------------------------


class _CovCache:
    """Sample covariances keyed by (row set, variables); rows depend on the deletion mode."""

    def __init__(self, data: Dataset):
        self.data = data
        self._listwise_rows: np.ndarray | None = None
        self._entries: dict[tuple[str, frozenset[int]], tuple[np.ndarray, int, list[int]]] = {}

    def listwise_rows(self) -> np.ndarray:
        if self._listwise_rows is None:
            self._listwise_rows = testwise_rows(self.data, range(self.data.p))
        return self._listwise_rows

    def get(self, mode: str, variables: frozenset[int]) -> tuple[np.ndarray, int, list[int]]:
        key = (mode, variables)
        hit = self._entries.get(key)
        if hit is None:
            cols = sorted(variables)
            rows = self.listwise_rows() if mode == "list" else testwise_rows(self.data, cols)
            block = self.data.values[np.ix_(rows, cols)]
            cov = np.cov(block, rowvar=False, ddof=1).reshape(len(cols), len(cols)) if len(rows) > 1 else None
            hit = (cov, len(rows), cols)
            self._entries[key] = hit
        return hit


def _run(data: Dataset, i: int, j: int, W: Sequence[int], alpha: float, mode: str,
         strategy: Strategy, cache: _CovCache | None) -> CIDecision:
    cache = cache or _CovCache(data)
    W = tuple(W)
    cov, n_eff, cols = cache.get(mode, frozenset((i, j, *W)))
    if n_eff <= len(W) + 3:
        log.debug("insufficient rows (%d) for %s test %d,%d|%s", n_eff, strategy.value, i, j, W)
        return CIDecision(i, j, W, strategy, n_eff, 1.0, True, degenerate=True)
    pos = {v: k for k, v in enumerate(cols)}
    p, indep = fisher_z(cov, n_eff, pos[i], pos[j], [pos[w] for w in W], alpha)
    return CIDecision(i, j, W, strategy, n_eff, p, indep)


def _record(log_list: list | None, d: CIDecision) -> CIDecision:
    if log_list is not None:
        log_list.append(d)
    return d


def ci_testwise(data, i, j, W, alpha, *, log_list=None, cache=None) -> CIDecision:
    """Fisher z on the rows complete in ``{i, j} | W``."""
    return _record(log_list, _run(data, i, j, W, alpha, "test", Strategy.TESTWISE, cache))


def ci_listwise(data, i, j, W, alpha, *, log_list=None, cache=None) -> CIDecision:
    """Fisher z on the rows complete in every column."""
    return _record(log_list, _run(data, i, j, W, alpha, "list", Strategy.LISTWISE, cache))


def ci_heuristic(data, i, j, W, alpha, *, log_list=None, cache=None) -> CIDecision:
    """Test-wise deletion without the list-wise confirmation."""
    d = _run(data, i, j, W, alpha, "test", Strategy.HEURISTIC, cache)
    return _record(log_list, d)


def ci_wrapper(data, i, j, W, alpha, *, log_list=None, cache=None) -> CIDecision:
    """Test-wise query, confirmed by a list-wise query only when it says independent.

    The combined p-value is the minimum of the two, so the verdict is
    independence exactly when both queries accept it.
    """
    first = _run(data, i, j, W, alpha, "test", Strategy.WRAPPER, cache)
    if not first.independent:
        return _record(log_list, first)
    second = _run(data, i, j, W, alpha, "list", Strategy.LISTWISE, cache)
    p = min(first.p_value, second.p_value)
    combined = CIDecision(i, j, first.W, Strategy.WRAPPER, first.effective_n, p,
                          first.independent and second.independent, first.degenerate)
    _record(log_list, combined)
    _record(log_list, second)
    return combined


STRATEGY_FUNCS: dict[Strategy, Callable[..., CIDecision]] = {
    Strategy.TESTWISE: ci_testwise,
    Strategy.LISTWISE: ci_listwise,
    Strategy.WRAPPER: ci_wrapper,
    Strategy.HEURISTIC: ci_heuristic,
}


# -- testers -------------------------------------------------------------------


class CITester:
    """Memoised ``decide(i, j, W)`` with a log of executed tests."""

    strategy: Strategy
    p: int

    def __init__(self):
        self._memo: dict[tuple[int, int, frozenset[int]], CIDecision] = {}
        self.log: list[CIDecision] = []

    def decide(self, i: int, j: int, W: Iterable[int] = ()) -> CIDecision:
        W = tuple(sorted(set(W)))
        if i == j or i in W or j in W:
            raise InvalidArgumentError("i, j and W must be disjoint")
        a, b = (i, j) if i < j else (j, i)
        key = (a, b, frozenset(W))
        hit = self._memo.get(key)
        if hit is None:
            hit = self._compute(a, b, W)
            self._memo[key] = hit
        return hit

    def independent(self, i: int, j: int, W: Iterable[int] = ()) -> bool:
        return self.decide(i, j, W).independent

    def _compute(self, i: int, j: int, W: tuple[int, ...]) -> CIDecision:
        raise NotImplementedError

    def primary_log(self) -> list[CIDecision]:
        """Logged decisions made under this tester's own strategy label."""
        return [d for d in self.log if d.strategy is self.strategy]


class DataCITester(CITester):
    def __init__(self, data: Dataset, strategy: Strategy | str, alpha: float = 0.01):
        super().__init__()
        self.strategy = Strategy(strategy)
        if self.strategy is Strategy.ORACLE:
            raise InvalidArgumentError("the oracle strategy needs a CausalSystem")
        if not 0 < alpha < 1:
            raise InvalidArgumentError("alpha must lie in (0, 1)")
        self.data = data
        self.alpha = alpha
        self.p = data.p
        self._cache = _CovCache(data)
        self._func = STRATEGY_FUNCS[self.strategy]

    def _compute(self, i, j, W):
        return self._func(self.data, i, j, W, self.alpha, log_list=self.log, cache=self._cache)


class OracleCITester(CITester):
    """d-separation verdicts with the selection set each strategy induces.

    Variable ``k`` is the system's ``observed[k]``.  ``ListWise`` conditions
    on every indicator, ``TestWise``/``Heuristic`` on the indicators of the
    tested variables, ``Wrapper`` combines the two as the data version does,
    and ``Oracle`` uses the fixed ``selection`` (default: the system's S).
    """

    def __init__(self, system: CausalSystem, strategy: Strategy | str = Strategy.ORACLE,
                 selection: Iterable[int] | None = None):
        super().__init__()
        self.strategy = Strategy(strategy)
        self.system = system
        self.observed = system.observed
        self.p = len(self.observed)
        self.selection = system.selection if selection is None else frozenset(selection)

    def _verdict(self, oi: int, oj: int, W: list[int], sel: Iterable[int]) -> bool:
        return oracle_ci(self.system, oi, oj, W, sel)

    def _compute(self, i, j, W):
        obs = self.observed
        oi, oj, ow = obs[i], obs[j], [obs[w] for w in W]
        s = self.strategy
        confirm = None
        if s is Strategy.ORACLE:
            indep = self._verdict(oi, oj, ow, self.selection)
        elif s is Strategy.LISTWISE:
            indep = self._verdict(oi, oj, ow, self.system.listwise_selection)
        else:
            indep = self._verdict(oi, oj, ow, self.system.selection_for([oi, oj, *ow]))
            if s is Strategy.WRAPPER and indep:
                confirm = CIDecision(i, j, W, Strategy.LISTWISE, None, None,
                                     self._verdict(oi, oj, ow, self.system.listwise_selection))
                indep = confirm.independent
        d = CIDecision(i, j, W, s, None, None, indep)
        self.log.append(d)
        if confirm is not None:
            self.log.append(confirm)
        return d


def make_tester(source: Dataset | CausalSystem, strategy: Strategy | str, alpha: float = 0.01, **kw) -> CITester:
    if isinstance(source, CausalSystem):
        return OracleCITester(source, strategy, **kw)
    return DataCITester(source, strategy, alpha)


# -- log export ------------------------------------------------------------------


def log_rows(decisions: Iterable[CIDecision]) -> list[list[str]]:
    rows = []
    for d in decisions:
        rows.append([
            d.strategy.value, str(d.i), str(d.j), " ".join(map(str, d.W)),
            "" if d.effective_n is None else str(d.effective_n),
            "" if d.p_value is None else repr(d.p_value),
            str(int(d.independent)), str(int(d.degenerate)),
        ])
    return rows


def write_log(decisions: Iterable[CIDecision], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        w.writerows(log_rows(decisions))


def read_log(path: str | Path) -> list[CIDecision]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(CIDecision(
                int(row["i"]), int(row["j"]), tuple(int(w) for w in row["W"].split()),
                Strategy(row["strategy"]),
                int(row["effective_n"]) if row["effective_n"] else None,
                float(row["p_value"]) if row["p_value"] else None,
                row["independent"] == "1", row["degenerate_flag"] == "1",
            ))
    return out
