"""
Edge re-weighting and feature propagation on toy graphs
=======================================================

Each edge weight is (d_i + d_j) * (common_neighbours + 1) / (2 * d_i * d_j),
so edges inside dense pockets keep weight close to 1 and bridges between
hubs shrink.
"""

import numpy as np

from gccfp import build_graph, diffusion_reweight, propagate_features

# a triangle: every pair shares one neighbour, degrees are 2
tri = build_graph(3, [(0, 1), (1, 2), (0, 2)], [np.eye(3)])
print("triangle\n", diffusion_reweight(tri).matrix.toarray())

# a path 0-1-2: no common neighbours, the centre has degree 2
path = build_graph(3, [(0, 1), (1, 2)], [np.eye(3)])
dw = diffusion_reweight(path)
print("path\n", dw.matrix.toarray())

# two triangles joined by one bridge edge (2, 3)
barbell = build_graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)], [np.eye(6)])
w = diffusion_reweight(barbell).matrix
print("inside a triangle (0, 1):", w[0, 1], " bridge (2, 3):", w[2, 3])

# features travel along weighted edges: H = F D
# one feature switched on at the path's middle vertex reaches both ends
f = np.array([[0.0, 1.0, 0.0]])
path1 = build_graph(3, [(0, 1), (1, 2)], [f])
print("propagated path feature:", propagate_features(path1, diffusion_reweight(path1)).per_view[0].toarray().ravel())
h = (f @ dw.matrix.toarray()).ravel()
print("same thing by hand:     ", h)
