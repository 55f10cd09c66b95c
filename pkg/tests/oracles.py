"""Brute-force reference implementations used by the tests.

Each oracle is written as plain Python loops over the definitions, with no
numpy vectorisation or shared helpers from the package, so that agreement
with the package is evidence rather than tautology.
"""
import math


def within(a, b, r):
    return [[(p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 <= r * r for q in b] for p in a]


def pairs(points, r):
    out = []
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if (points[i][0] - points[j][0]) ** 2 + (points[i][1] - points[j][1]) ** 2 <= r * r:
                out.append((i, j))
    return out


def count(points, centers, r):
    return [sum((p[0] - c[0]) ** 2 + (p[1] - c[1]) ** 2 <= r * r for c in centers) for p in points]


def annulus(points, anchors, d_min, r_max):
    out = []
    for p in points:
        d2 = [(p[0] - a[0]) ** 2 + (p[1] - a[1]) ** 2 for a in anchors]
        out.append(bool(d2) and min(d2) <= r_max * r_max and all(d >= d_min * d_min for d in d2))
    return out


def union_cells(centers, r, width, height, res):
    """Cells (side ``res``) whose centre lies in at least one disc."""
    nx, ny = int(round(width / res)), int(round(height / res))
    n = 0
    for i in range(nx):
        for j in range(ny):
            cx, cy = (i + 0.5) * res, (j + 0.5) * res
            if any((cx - x) ** 2 + (cy - y) ** 2 <= r * r for x, y in centers):
                n += 1
    return n


def completion_tick(budget, observers, dt=1.0):
    """Tick at which an event with ``budget`` completes under ``observers`` per tick."""
    t = 0
    while True:
        budget -= observers * dt
        if budget <= 0:
            return t
        t += 1


def dissolution_ticks(gamma_max, depth):
    """Ticks of pure decay until gamma hits zero."""
    g, t = gamma_max, 0
    while g > 0:
        g = max(0, g - depth)
        t += 1
    return t


def best_recruit_target(grid_w, grid_h, res, anchors, d_min, comm_range, events, sensing_range):
    """Exhaustive search over every grid point (x-major, then y) for the first maximum."""
    best, best_s = None, -1
    nx, ny = int(math.floor(grid_w / res + 1e-9)), int(math.floor(grid_h / res + 1e-9))
    for i in range(nx + 1):
        for j in range(ny + 1):
            x, y = i * res, j * res
            d2 = [(x - a[0]) ** 2 + (y - a[1]) ** 2 for a in anchors]
            if not d2 or min(d2) > comm_range ** 2 or any(d < d_min ** 2 for d in d2):
                continue
            s = sum((x - e[0]) ** 2 + (y - e[1]) ** 2 <= sensing_range ** 2 for e in events)
            if s > best_s:
                best, best_s = (float(x), float(y)), s
    return best, best_s


def percentile_linear(values, q):
    """Linear-interpolation percentile (numpy's default), written out by hand."""
    v = sorted(values)
    pos = (len(v) - 1) * q / 100.0
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (v[hi] - v[lo]) * (pos - lo)


def average_ranks(x):
    order = sorted(range(len(x)), key=lambda i: x[i])
    ranks = [0.0] * len(x)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and x[order[j + 1]] == x[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2.0 + 1
        i = j + 1
    return ranks


def spearman(x, y):
    rx, ry = average_ranks(x), average_ranks(y)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = math.sqrt(sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry))
    return num / den
