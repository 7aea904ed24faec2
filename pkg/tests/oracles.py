"""Independent reference implementations used only by the tests.

None of these share code with the package paths they check.
"""

import itertools

import numpy as np


def simplex_projection_exhaustive(f):
    """Closest point of the probability simplex to ``f``, by enumerating supports.

    For each nonempty support set S the minimiser of ||x - f|| subject to
    sum(x) = 1 and x = 0 off S is an affine shift of f on S. The projection is
    the feasible (nonnegative) candidate of smallest distance.
    """
    f = np.asarray(f, dtype=float)
    d = f.size
    masks = np.array(list(itertools.product([False, True], repeat=d))[1:])
    sizes = masks.sum(axis=1)
    shift = ((masks * f).sum(axis=1) - 1.0) / sizes
    cand = np.where(masks, f[None, :] - shift[:, None], 0.0)
    feasible = (cand >= -1e-13).all(axis=1)
    dist = ((cand - f) ** 2).sum(axis=1)
    dist[~feasible] = np.inf
    return np.maximum(cand[np.argmin(dist)], 0.0)


def simplex_projection_sort(f):
    """Sort-and-threshold projection onto the probability simplex."""
    f = np.asarray(f, dtype=float)
    u = np.sort(f)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, f.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(f - css[rho] / (rho + 1), 0.0)


def histogram(values, d):
    counts = [0] * d
    for v in values:
        counts[int(v)] += 1
    n = len(values)
    return [c / n for c in counts]


def mse_loop(a, b):
    total = 0.0
    for x, y in zip(a, b):
        total += (float(x) - float(y)) ** 2
    return total / len(a)


def support_count_direct(protocol_name, reports, d, g=None, hash_fn=None):
    """Per-item support counts by walking every report and item one at a time."""
    counts = [0] * d
    if protocol_name == "grr":
        for x in reports.items:
            counts[int(x)] += 1
    elif protocol_name == "oue":
        for row in reports.bits:
            for v in range(d):
                counts[v] += int(row[v])
    else:
        for seed, val in zip(reports.seeds, reports.values):
            for v in range(d):
                counts[v] += int(hash_fn(int(seed), v, g) == int(val))
    return counts
