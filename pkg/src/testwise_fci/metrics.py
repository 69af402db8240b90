"""Graph distances and sample-usage accounting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .citest import CIDecision, Strategy
from .exceptions import InvalidArgumentError, UndefinedMetricError
from .graph import MixedGraph


def _as_graph(g) -> MixedGraph:
    return getattr(g, "graph", g)


def _pair_arrays(g1, g2) -> tuple[np.ndarray, np.ndarray]:
    a, b = _as_graph(g1), _as_graph(g2)
    if a.n != b.n:
        raise InvalidArgumentError(f"graphs differ in size: {a.n} vs {b.n}")
    return a.mark_matrix(), b.mark_matrix()


def skeleton_shd(g1, g2) -> int:
    """Number of vertex pairs adjacent in exactly one graph."""
    m1, m2 = _pair_arrays(g1, g2)
    diff = (m1 != 0) != (m2 != 0)
    return int(np.count_nonzero(np.triu(diff)))


def shd(g1, g2) -> int:
    """Adjacency mismatches plus, for shared edges, one per differing endpoint mark."""
    m1, m2 = _pair_arrays(g1, g2)
    both = (m1 != 0) & (m2 != 0)
    endpoint_diff = int(np.count_nonzero(both & (m1 != m2)))
    return skeleton_shd(g1, g2) + endpoint_diff


def mean_effective_n(decisions: Iterable[CIDecision]) -> float:
    ns = [d.effective_n for d in decisions if d.effective_n is not None]
    if not ns:
        raise UndefinedMetricError("no logged decisions with a sample size")
    return float(np.mean(ns))


def sample_gain(log_a: Iterable[CIDecision], log_b: Iterable[CIDecision]) -> float:
    """Percentage increase of the mean per-test sample size of ``a`` over ``b``."""
    mean_a, mean_b = mean_effective_n(log_a), mean_effective_n(log_b)
    if mean_b == 0:
        raise UndefinedMetricError("reference log has zero mean sample size")
    return 100.0 * (mean_a - mean_b) / mean_b


@dataclass
class ScoreReport:
    shd: int
    skeleton_shd: int
    avg_effective_n: dict[str, float] = field(default_factory=dict)
    n_queries: dict[str, int] = field(default_factory=dict)
    pct_sample_gain: float | None = None


def usage_by_strategy(decisions: Iterable[CIDecision]) -> tuple[dict[str, float], dict[str, int]]:
    groups: dict[str, list[int]] = {}
    counts: dict[str, int] = {}
    for d in decisions:
        key = d.strategy.value
        counts[key] = counts.get(key, 0) + 1
        if d.effective_n is not None:
            groups.setdefault(key, []).append(d.effective_n)
    return {k: float(np.mean(v)) for k, v in sorted(groups.items())}, dict(sorted(counts.items()))


def score(learned, truth, decisions: Iterable[CIDecision] = (),
          reference: Iterable[CIDecision] | None = None, strategy: Strategy | str | None = None) -> ScoreReport:
    """Score ``learned`` against ``truth``; ``reference`` is a list-wise log for the gain."""
    decisions = list(decisions)
    avg, counts = usage_by_strategy(decisions)
    report = ScoreReport(shd(learned, truth), skeleton_shd(learned, truth), avg, counts)
    if reference is not None and strategy is not None:
        own = [d for d in decisions if d.strategy is Strategy(strategy)]
        try:
            report.pct_sample_gain = sample_gain(own, reference)
        except UndefinedMetricError:
            report.pct_sample_gain = None
    return report
