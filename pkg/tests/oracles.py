"""Independent reference implementations used as test oracles."""

import math

import numpy as np


def rot_z(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def inside_box(points, center, size, heading):
    """Membership by explicit per-axis projection onto the box's unit axes."""
    w, h, l = size
    ax = np.array([math.cos(heading), math.sin(heading), 0.0])
    ay = np.array([-math.sin(heading), math.cos(heading), 0.0])
    d = np.asarray(points) - np.asarray(center)
    return (np.abs(d @ ax) <= l / 2) & (np.abs(d @ ay) <= w / 2) & (np.abs(d[:, 2]) <= h / 2)


def monte_carlo_iou(a, b, n=1_000_000, seed=0):
    """Sample the smaller box uniformly; the hit fraction estimates intersection / its volume."""
    if a.volume > b.volume:
        a, b = b, a
    rng = np.random.default_rng(seed)
    w, h, l = a.size
    local = rng.uniform(-0.5, 0.5, (n, 3)) * np.array([l, w, h])
    pts = local @ rot_z(a.heading).T + np.array(a.center)
    frac = inside_box(pts, b.center, b.size, b.heading).mean()
    inter = frac * a.volume
    return inter / (a.volume + b.volume - inter)


def brute_fps(x, count, start=0):
    """O(N^2 * count) farthest-point reference: recompute every min-distance from scratch."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    sel = [start]
    while len(sel) < min(count, n):
        best, best_d = None, -1.0
        for i in range(n):
            if i in sel:
                continue
            d = min(float(np.sum((x[i] - x[j]) ** 2)) for j in sel)
            if d > best_d:
                best, best_d = i, d
        sel.append(best)
    out = [sel[i % len(sel)] for i in range(count)]
    return np.array(out)


def brute_knn(query, base, k):
    rows = []
    for q in np.asarray(query):
        d = [(float(np.sum((q - b) ** 2)), j) for j, b in enumerate(np.asarray(base))]
        d.sort()
        idx = [j for _, j in d[:k]]
        while len(idx) < k:
            idx.append(idx[0])
        rows.append(idx)
    return np.array(rows)


def naive_ptt(coords, feats, params, prefix, k_idx, heads=1, position_in_value=True):
    """Straight-line loops over seeds, neighbors and channels for one PTT layer."""
    def lin(x, name):
        W, b = params[f"{name}.W"].data, params[f"{name}.b"].data
        out = np.zeros(W.shape[1])
        for o in range(W.shape[1]):
            acc = b[o]
            for i in range(W.shape[0]):
                acc += x[i] * W[i, o]
            out[o] = acc
        return out

    def relu(v):
        return np.array([max(0.0, t) for t in v])

    n, d = feats.shape
    k = k_idx.shape[1]
    g = [lin(feats[i], f"{prefix}.embed") for i in range(n)]
    m = len(g[0])
    mh = m // heads
    out = np.zeros((n, d))
    for i in range(n):
        pos = [lin(relu(lin(coords[i] - coords[k_idx[i, j]], f"{prefix}.pos1")), f"{prefix}.pos2")
               for j in range(k)]
        agg = np.zeros(m)
        for h in range(heads):
            ph = f"{prefix}.h{h}"
            q = lin(g[i], f"{ph}.q")
            logits = np.zeros((k, mh))
            vals = np.zeros((k, mh))
            for j in range(k):
                nb = k_idx[i, j]
                kk = lin(g[nb], f"{ph}.k")
                vv = lin(g[nb], f"{ph}.v")
                p = pos[j][h * mh:(h + 1) * mh]
                logits[j] = lin(relu(lin(q - kk + p, f"{ph}.attn1")), f"{ph}.attn2")
                vals[j] = vv + p if position_in_value else vv
            for c in range(mh):
                mx = max(logits[j, c] for j in range(k))
                e = [math.exp(logits[j, c] - mx) for j in range(k)]
                z = sum(e)
                agg[h * mh + c] = sum(e[j] / z * vals[j, c] for j in range(k))
        out[i] = feats[i] + lin(agg, f"{prefix}.out")
    return out


def cosine_matrix(a, b):
    out = np.zeros((len(b), len(a)))
    for i in range(len(b)):
        for j in range(len(a)):
            out[i, j] = float(np.dot(b[i], a[j]) / (np.linalg.norm(b[i]) * np.linalg.norm(a[j])))
    return out


def trapezoid_percent(values, grid):
    area = 0.0
    for i in range(1, len(grid)):
        area += (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]) / 2
    return 100.0 * area / (grid[-1] - grid[0])


def matrix_fps(x, count, start=0):
    """Farthest-point reference over a precomputed distance matrix; fast enough for hundreds of cases."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    d = ((x[:, None, :] - x[None, :, :]) ** 2).sum(-1)
    sel = [start]
    while len(sel) < min(count, n):
        m = d[:, sel].min(axis=1)
        m[sel] = -1.0
        sel.append(int(np.argmax(m)))
    return np.array([sel[i % len(sel)] for i in range(count)])
