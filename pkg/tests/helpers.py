"""Small builders shared by the test modules."""

import itertools

import numpy as np

from testwise_fci.graph import MixedGraph
from testwise_fci.synth import INJECTORS, GenConfig, generate_dag, sample_sem
from testwise_fci.system import CausalSystem, Role


def random_dag(rng, p, prob=0.4):
    edges = [(i, j) for i, j in itertools.combinations(range(p), 2) if rng.random() < prob]
    perm = rng.permutation(p)
    return MixedGraph.from_directed_edges(p, [(int(perm[i]), int(perm[j])) for i, j in edges])


def all_dags_of_skeleton_free(p):
    """Every DAG over p vertices whose edges respect the order 0 < 1 < ... (one per edge subset)."""
    pairs = list(itertools.combinations(range(p), 2))
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        yield MixedGraph.from_directed_edges(p, [e for e, b in zip(pairs, bits) if b])


def random_system(rng, p, n_latent=1, n_selection=0):
    """A DAG over p vertices with random latent and selection roles, no indicators."""
    dag = random_dag(rng, p)
    roles = [Role.OBSERVED] * p
    picks = rng.choice(p, size=n_latent + n_selection, replace=False)
    for v in picks[:n_latent]:
        roles[int(v)] = Role.LATENT
    for v in picks[n_latent:]:
        roles[int(v)] = Role.SELECTION
    return CausalSystem(dag, tuple(roles), {})


def generated_system(seed, p, kind="MNAR", **cfg):
    rng = np.random.default_rng(seed)
    cfg.setdefault("n_latent_confounders", (0, max(0, min(4, p - 6))))
    gen = GenConfig(p=p, **cfg)
    model = generate_dag(gen, rng)
    data = sample_sem(model, 30, rng)
    return INJECTORS[kind](model, data, gen, rng)[1]


def subsets(items, max_size=None):
    items = list(items)
    top = len(items) if max_size is None else min(max_size, len(items))
    for k in range(top + 1):
        yield from itertools.combinations(items, k)
