"""Independent reference computations shared by the unit and acceptance tests."""

import numpy as np
from scipy.spatial import Delaunay

from chtsurrogate.datapipe import UnstructuredMesh


def random_triangulation(rng, n_points=30, width=1.0, height=1.0):
    """Delaunay mesh of the box corners plus random interior points, with a random field."""
    pts = np.r_[[[0, 0], [width, 0], [0, height], [width, height]],
                rng.uniform((0, 0), (width, height), (n_points, 2))]
    tri = Delaunay(pts)
    values = rng.uniform(-1.0, 1.0, len(tri.simplices))
    mesh = UnstructuredMesh([pts[s] for s in tri.simplices], {"f": values}, bbox=(0, 0, width, height))
    return mesh, tri, values


def monte_carlo_pixels(tri, values, n_x, n_y, px, rng, per_side=1000):
    """Pixel means from jittered point sampling (per_side² points per pixel) and point location."""
    out = np.empty((n_y, n_x))
    k = np.arange(per_side)
    for j in range(n_y):
        for i in range(n_x):
            gx = (i + (k + rng.uniform(size=per_side)) / per_side) * px
            gy = (j + (k + rng.uniform(size=per_side)) / per_side) * px
            X, Y = np.meshgrid(gx, gy)
            s = tri.find_simplex(np.c_[X.ravel(), Y.ravel()])
            assert np.all(s >= 0)
            out[j, i] = values[s].mean()
    return out


def pearson(a, b):
    return float(np.corrcoef(np.ravel(a), np.ravel(b))[0, 1])
