"""Independent reference implementations the tests compare against.

Everything here is deliberately written the slow, obvious way (explicit
loops, dense sampling, scipy KD-trees) and shares no code with the
package internals beyond numpy itself.
"""

import numpy as np
from scipy.spatial import cKDTree


def brute_fps(points, n, start):
    """Greedy farthest point sampling with explicit python loops.

    Ties resolved toward the lowest index, matching numpy's argmax.
    """
    pts = np.asarray(points, dtype=float)
    chosen = [int(start)]
    while len(chosen) < n:
        best_i, best_d = -1, -np.inf
        for i in range(pts.shape[0]):
            d = min(float(((pts[i] - pts[j]) ** 2).sum()) for j in chosen)
            if d > best_d:
                best_i, best_d = i, d
        chosen.append(best_i)
    return chosen


def brute_min_distance(a, b):
    tree = cKDTree(b)
    d, _ = tree.query(a)
    return float(d.min())


def brute_interlocks(a, b, radius):
    """Does any cross pair sit strictly inside ``radius``?"""
    tree = cKDTree(b)
    d, _ = tree.query(a)
    return bool((d < radius).any())


def brute_collision_pairs(teeth):
    """Set of interlocking (id, id) pairs among Tooth objects."""
    pairs = set()
    for i, a in enumerate(teeth):
        for b in teeth[i + 1 :]:
            if brute_interlocks(a.points, b.points, a.proxy_radius + b.proxy_radius):
                pairs.add((a.id, b.id))
    return pairs


def brute_xy_mask(points, region, tau):
    """Occlusal overlap mask by exhaustive 2D nearest neighbor."""
    mask = np.zeros(len(points), dtype=bool)
    if len(region) == 0:
        return mask
    for i, p in enumerate(points):
        best = min(
            (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 for q in region
        )
        mask[i] = best < tau * tau
    return mask


def dense_curve_distance(arch, queries, samples=200001):
    """Distance to a dense polyline sampling of the spline."""
    t = np.linspace(0.0, arch.knots.shape[0] - 1.0, samples)
    curve = arch.point_at(t)
    tree = cKDTree(curve)
    d, _ = tree.query(np.atleast_2d(queries))
    return d


def central_difference(fn, theta, h=1e-5):
    g = np.zeros_like(theta)
    for i in range(theta.size):
        up = theta.copy()
        dn = theta.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (fn(up) - fn(dn)) / (2.0 * h)
    return g


def maxwell_mean(sigma):
    """Mean norm of an isotropic N(0, sigma^2 I_3) draw."""
    return sigma * 2.0 * np.sqrt(2.0 / np.pi)
