"""Random linear-Gaussian systems, sampling, and missingness injection."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .exceptions import ConfigError
from .graph import MixedGraph
from .system import CausalSystem, Role, system_to_text

MISSINGNESS_KINDS = ("MNAR", "MAR", "MCAR", "none")


@dataclass
class GenConfig:
    p: int = 20
    expected_neighbors: float = 2.0
    n_latent_confounders: tuple[int, int] = (0, 4)
    n_missingness_drivers: tuple[int, int] = (1, 2)
    vars_per_driver: tuple[int, int] = (3, 6)
    r_range: tuple[float, float] = (0.1, 0.5)
    seed: int = 0

    def __post_init__(self):
        for name in ("n_latent_confounders", "n_missingness_drivers", "vars_per_driver", "r_range"):
            setattr(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        if self.p < 2:
            raise ConfigError("p must be at least 2")
        if not 0 <= self.expected_neighbors < self.p:
            raise ConfigError("expected_neighbors must lie in [0, p)")
        for name in ("n_latent_confounders", "n_missingness_drivers", "vars_per_driver"):
            lo, hi = getattr(self, name)
            if lo < 0 or lo > hi:
                raise ConfigError(f"{name} must be a non-empty range of non-negative integers")
        lo, hi = self.r_range
        if not 0 <= lo <= hi < 1:
            raise ConfigError("r_range must be a sub-interval of [0, 1)")

    def to_dict(self) -> dict[str, Any]:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass
class SemModel:
    """``X_i = sum_r A[i, r] X_r + eps_i`` plus a mean shift ``mu``."""

    A: np.ndarray
    mu: np.ndarray

    @property
    def p(self) -> int:
        return self.A.shape[0]

    def dag(self) -> MixedGraph:
        return MixedGraph.from_weights(self.A)


@dataclass
class Dataset:
    values: np.ndarray
    mask: np.ndarray  # True where the value was recorded
    column_names: list[str]
    info: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.ndim != 2 or self.values.shape != self.mask.shape:
            raise ValueError("values and mask must be matching 2-d arrays")
        n, p = self.values.shape
        if n < 1 or p < 1:
            raise ValueError("a dataset needs at least one row and one column")
        if len(self.column_names) != p:
            raise ValueError("one column name per column required")
        # masked cells are blanked so nothing downstream can read them
        self.values = np.where(self.mask, self.values, np.nan)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def missing_fraction(self) -> np.ndarray:
        return 1.0 - self.mask.mean(axis=0)


def generate_dag(cfg: GenConfig, rng: np.random.Generator) -> SemModel:
    """Random lower-triangular SEM with edge probability ``E(N) / (p - 1)``."""
    cfg.validate()
    p = cfg.p
    prob = cfg.expected_neighbors / (p - 1)
    lower = np.tril(np.ones((p, p), dtype=bool), k=-1)
    present = (rng.random((p, p)) < prob) & lower
    weights = rng.uniform(0.1, 1.0, size=(p, p)) * rng.choice([-1.0, 1.0], size=(p, p))
    A = np.where(present, weights, 0.0)
    mu = rng.normal(0.0, 2.0, size=p)  # N(0, 4): variance 4
    return SemModel(A, mu)


def analytic_cov(m: SemModel) -> np.ndarray:
    """Covariance ``(I - A)^-1 (I - A)^-T`` of the unit-noise SEM."""
    B = np.linalg.inv(np.eye(m.p) - m.A)
    return B @ B.T


def sample_sem(m: SemModel, n: int, rng: np.random.Generator) -> Dataset:
    if n < 1:
        raise ConfigError("n must be positive")
    eps = rng.standard_normal((n, m.p))
    X = np.empty_like(eps)
    for i in range(m.p):  # A is lower triangular, so index order is topological
        X[:, i] = X[:, :i] @ m.A[i, :i] + eps[:, i]
    X += m.mu
    return Dataset(X, np.ones_like(X, dtype=bool), [f"X{i}" for i in range(m.p)])


# -- missingness ---------------------------------------------------------------


def _draw_count(rng: np.random.Generator, lo: int, hi: int) -> int:
    return int(rng.integers(lo, hi + 1))


def _below_quantile(col: np.ndarray, r: float) -> np.ndarray:
    """Rows strictly below the nearest-rank r-quantile of ``col``."""
    if r <= 0:
        return np.zeros(col.shape, dtype=bool)
    return col < np.quantile(col, r, method="inverted_cdf")


def _pick_targets(cfg: GenConfig, pool: list[int], rng: np.random.Generator) -> list[int]:
    lo, hi = cfg.vars_per_driver
    if len(pool) < lo:
        raise ConfigError(f"only {len(pool)} candidate variables for a driver needing at least {lo}")
    k = _draw_count(rng, lo, min(hi, len(pool)))
    return sorted(int(v) for v in rng.choice(pool, size=k, replace=False))


def _choose(rng: np.random.Generator, pool: list[int], k: int) -> list[int]:
    if k > len(pool):
        raise ConfigError(f"cannot choose {k} vertices from {len(pool)}")
    return sorted(int(v) for v in rng.choice(pool, size=k, replace=False)) if k else []


def _assemble(
    m: SemModel,
    data: Dataset,
    hidden: list[int],
    confounders: list[int],
    drivers: list[int | None],
    targets: list[list[int]],
    rows_missing: list[np.ndarray],
    kind: str,
    rs: list[float],
) -> tuple[Dataset, CausalSystem]:
    p = m.p
    mask = data.mask.copy()
    for tg, rows in zip(targets, rows_missing):
        for t in tg:
            mask[rows, t] = False
    edges = [(int(r), int(i)) for i, r in zip(*np.nonzero(m.A))]
    roles = [Role.OBSERVED] * p
    for v in hidden:
        roles[v] = Role.LATENT
    imap: dict[int, set[int]] = {}
    for k, (drv, tg) in enumerate(zip(drivers, targets)):
        ind = p + k
        roles.append(Role.INDICATOR)
        if drv is not None:
            edges.append((drv, ind))
        for t in tg:
            imap.setdefault(t, set()).add(ind)
    dag = MixedGraph.from_directed_edges(len(roles), edges)
    system = CausalSystem(dag, tuple(roles), {k: frozenset(v) for k, v in imap.items()})
    keep = system.observed
    info = {
        "missingness": kind,
        "latent_confounders": confounders,
        "drivers": drivers,
        "targets": targets,
        "r": rs,
        "observed": keep,
    }
    out = Dataset(data.values[:, keep], mask[:, keep], [data.column_names[v] for v in keep], info)
    return out, system


def _require_complete(data: Dataset, m: SemModel) -> None:
    if not data.mask.all():
        raise ConfigError("missingness must be injected into fully observed data")
    if data.p != m.p:
        raise ConfigError("dataset does not match the model")


def inject_mnar(m: SemModel, data: Dataset, cfg: GenConfig, rng: np.random.Generator) -> tuple[Dataset, CausalSystem]:
    """Missingness driven by latent variables that are dropped from the output."""
    _require_complete(data, m)
    p = m.p
    confounders = _choose(rng, list(range(p)), _draw_count(rng, *cfg.n_latent_confounders))
    rest = [v for v in range(p) if v not in confounders]
    drivers = _choose(rng, rest, _draw_count(rng, *cfg.n_missingness_drivers))
    observed = [v for v in rest if v not in drivers]
    targets, rows, rs = [], [], []
    for d in drivers:
        targets.append(_pick_targets(cfg, observed, rng))
        r = float(rng.uniform(*cfg.r_range))
        rs.append(r)
        rows.append(_below_quantile(data.values[:, d], r))
    return _assemble(m, data, confounders + drivers, confounders, list(drivers), targets, rows, "MNAR", rs)


def inject_mar(m: SemModel, data: Dataset, cfg: GenConfig, rng: np.random.Generator) -> tuple[Dataset, CausalSystem]:
    """Missingness driven by fully observed variables; latent confounders have two or more children."""
    _require_complete(data, m)
    p = m.p
    n_children = np.count_nonzero(m.A, axis=0)
    eligible = [v for v in range(p) if n_children[v] >= 2]
    k = min(_draw_count(rng, *cfg.n_latent_confounders), len(eligible))
    confounders = _choose(rng, eligible, k)
    observed = [v for v in range(p) if v not in confounders]
    drivers = _choose(rng, observed, _draw_count(rng, *cfg.n_missingness_drivers))
    pool = [v for v in observed if v not in drivers]
    targets, rows, rs = [], [], []
    for d in drivers:
        targets.append(_pick_targets(cfg, pool, rng))
        r = float(rng.uniform(*cfg.r_range))
        rs.append(r)
        rows.append(_below_quantile(data.values[:, d], r))
    return _assemble(m, data, confounders, confounders, list(drivers), targets, rows, "MAR", rs)


def inject_mcar(m: SemModel, data: Dataset, cfg: GenConfig, rng: np.random.Generator) -> tuple[Dataset, CausalSystem]:
    """Missingness driven by independent noise; indicators are isolated vertices."""
    _require_complete(data, m)
    p = m.p
    confounders = _choose(rng, list(range(p)), _draw_count(rng, *cfg.n_latent_confounders))
    observed = [v for v in range(p) if v not in confounders]
    n_mech = _draw_count(rng, *cfg.n_missingness_drivers)
    targets, rows, rs = [], [], []
    for _ in range(n_mech):
        targets.append(_pick_targets(cfg, observed, rng))
        r = float(rng.uniform(*cfg.r_range))
        rs.append(r)
        rows.append(_below_quantile(rng.standard_normal(data.n), r))
    return _assemble(m, data, confounders, confounders, [None] * n_mech, targets, rows, "MCAR", rs)


def inject_none(m: SemModel, data: Dataset, cfg: GenConfig, rng: np.random.Generator) -> tuple[Dataset, CausalSystem]:
    """Latent confounders only; every retained cell stays observed."""
    _require_complete(data, m)
    confounders = _choose(rng, list(range(m.p)), _draw_count(rng, *cfg.n_latent_confounders))
    return _assemble(m, data, confounders, confounders, [], [], [], "none", [])


INJECTORS = {"MNAR": inject_mnar, "MAR": inject_mar, "MCAR": inject_mcar, "none": inject_none}


def generate(cfg: GenConfig, n: int, missingness: str, rng: np.random.Generator) -> tuple[SemModel, Dataset, CausalSystem]:
    """Model, incomplete dataset and ground-truth system in one call."""
    if missingness not in INJECTORS:
        raise ConfigError(f"unknown missingness kind {missingness!r}")
    model = generate_dag(cfg, rng)
    full = sample_sem(model, n, rng)
    data, system = INJECTORS[missingness](model, full, cfg, rng)
    return model, data, system


# -- files ---------------------------------------------------------------------


def write_csv(data: Dataset, path: str | Path) -> None:
    """Header of column names; missing cells are left empty."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.column_names)
        for vals, obs in zip(data.values, data.mask):
            w.writerow([repr(float(v)) if o else "" for v, o in zip(vals, obs)])


def read_csv(path: str | Path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    mask = np.array([[cell != "" for cell in row] for row in body], dtype=bool)
    values = np.array([[float(cell) if cell != "" else np.nan for cell in row] for row in body])
    return Dataset(values.reshape(len(body), len(header)), mask.reshape(len(body), len(header)), header)


def write_manifest(path: str | Path, *, seed: int, cfg: GenConfig, system: CausalSystem, extra: dict | None = None) -> None:
    payload = {"seed": seed, "config": cfg.to_dict(), "system": system_to_text(system)}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
