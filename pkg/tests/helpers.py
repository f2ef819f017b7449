import numpy as np

from gccfp import Hyperparams, build_graph, init_factors, prepare_data


def random_instance(seed, n=8, view_sizes=(3, 2), k=2, s=2, p_edge=0.4, alpha=5.0, lam=1.0, delta=1e5):
    """Small random graph, features and strictly positive factors."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p_edge
    # ring edges keep every vertex connected
    ring = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    edges = np.vstack([np.column_stack([iu[keep], ju[keep]]), ring])
    views = [(rng.random((m, n)) < 0.5).astype(float) for m in view_sizes]
    graph = build_graph(n, edges, views)
    data = prepare_data(graph)
    hp = Hyperparams(alpha=alpha, lam=lam, delta=delta, k_clusters=max(k, 2), s_dim=s, seed=seed)
    fa = init_factors(n, list(view_sizes), k, s, seed=seed + 1000)
    return data, fa, hp


# acceptance verdict lines, printed in the terminal summary by conftest
ACCEPTANCE_LINES = []


def verdict(number, ok, detail, gating=True):
    tag = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
    if not gating:
        tag += " (non-gating)"
    line = f"criterion {number:>2}: {tag}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
