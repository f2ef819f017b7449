"""
Sensitivity to the structural and propagation weights
=====================================================

A small grid over alpha (weight on the re-weighted adjacency fit) and
lambda (weight tying the propagation factors to V). The same planted graph
and initialization are used for every cell.
"""

import numpy as np

from gccfp import Hyperparams, PlantedSpec, evaluate, extract_clusters, fit_data, generate, prepare_data

graph, truth = generate(PlantedSpec(p_in=0.1, p_out=0.05, views=((4, 0.3), (4, 0.3)), seed=9))
data = prepare_data(graph)

alphas = [0.01, 0.1, 1.0, 5.0, 10.0]
lams = [0.01, 0.1, 1.0, 10.0]
table = np.zeros((len(alphas), len(lams)))
for i, a in enumerate(alphas):
    for j, lam in enumerate(lams):
        fa, _ = fit_data(data, Hyperparams(alpha=a, lam=lam, k_clusters=3, seed=2))
        table[i, j] = evaluate(extract_clusters(fa.v), truth).nmi

print("NMI, rows alpha, columns lambda")
print("        " + "".join(f"{l:>8g}" for l in lams))
for a, row in zip(alphas, table):
    print(f"{a:>8g}" + "".join(f"{x:8.3f}" for x in row))

i, j = np.unravel_index(table.argmax(), table.shape)
print(f"best cell alpha={alphas[i]}, lambda={lams[j]}: NMI {table[i, j]:.3f}")
