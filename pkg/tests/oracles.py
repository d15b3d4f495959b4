"""Slow, independent reference implementations used only by the tests.

Everything here is a plain linear scan or a textbook closed form; nothing
imports the package's kd-tree or metric code.
"""

import math

import numpy as np


def nn_scan(test_pos, ref_pos, chunk=256):
    """Nearest reference index and squared distance for every test point.

    ``np.argmin`` returns the first minimum, i.e. the smallest index on ties.
    """
    test_pos = np.asarray(test_pos, dtype=np.float64)
    ref_pos = np.asarray(ref_pos, dtype=np.float64)
    idx = np.empty(len(test_pos), dtype=np.int64)
    sq = np.empty(len(test_pos))
    for lo in range(0, len(test_pos), chunk):
        t = test_pos[lo:lo + chunk, None, :]
        dx, dy, dz = (t[..., a] - ref_pos[None, :, a] for a in range(3))
        d = dx * dx + dy * dy + dz * dz
        i = np.argmin(d, axis=1)
        idx[lo:lo + chunk] = i
        sq[lo:lo + chunk] = d[np.arange(len(i)), i]
    return idx, sq


def knn_sort(ref_pos, q, k):
    d = ((np.asarray(ref_pos) - q) ** 2).sum(axis=1)
    order = sorted(range(len(d)), key=lambda i: (d[i], i))[:k]
    return [(i, float(d[i])) for i in order]


def mean(values):
    values = list(values)
    return math.fsum(values) / len(values)


def p2p_one_sided(test_pos, ref_pos, nn=None):
    _, sq = nn or nn_scan(test_pos, ref_pos)
    return mean(sq)


def p2plane_one_sided(test_pos, ref_pos, ref_normals, nn=None):
    idx, _ = nn or nn_scan(test_pos, ref_pos)
    vals = []
    for j, i in enumerate(idx):
        e = np.asarray(test_pos[j]) - np.asarray(ref_pos[i])
        n = ref_normals[i]
        p = e[0] * n[0] + e[1] * n[1] + e[2] * n[2]
        vals.append(p * p)
    return mean(vals)


def color_one_sided(test_pos, test_col, ref_pos, ref_col, nn=None):
    idx, _ = nn or nn_scan(test_pos, ref_pos)
    return [mean((test_col[j, ch] - ref_col[i, ch]) ** 2 for j, i in enumerate(idx)) for ch in range(3)]


def covariance(pos, col):
    g = [(p[0] + p[1] + p[2]) / 3.0 for p in pos]
    c = [(6 * y + u + v) / 8.0 for y, u, v in col]
    mg, mc = mean(g), mean(c)
    s00 = mean((a - mg) ** 2 for a in g)
    s11 = mean((b - mc) ** 2 for b in c)
    s01 = mean((a - mg) * (b - mc) for a, b in zip(g, c))
    return np.array([[s00, s01], [s01, s11]])


def unified(d_g, d_c, s):
    """sqrt(v S^-1 v^T) through the explicit 2x2 inverse."""
    (a, b), (_, d) = s
    det = a * d - b * b
    q = (d * d_g * d_g - 2 * b * d_g * d_c + a * d_c * d_c) / det
    return math.sqrt(max(q, 0.0))


def report(ref_pos, ref_col, test_pos, test_col, ref_normals, test_normals):
    """Every metric between two clouds, from the definitions."""
    tr, rt = nn_scan(test_pos, ref_pos), nn_scan(ref_pos, test_pos)
    g_tr = p2p_one_sided(test_pos, ref_pos, tr)
    g_rt = p2p_one_sided(ref_pos, test_pos, rt)
    p_tr = p2plane_one_sided(test_pos, ref_pos, ref_normals, tr)
    p_rt = p2plane_one_sided(ref_pos, test_pos, test_normals, rt)
    c_tr = color_one_sided(test_pos, test_col, ref_pos, ref_col, tr)
    c_rt = color_one_sided(ref_pos, ref_col, test_pos, test_col, rt)
    y, u, v = (max(a, b) for a, b in zip(c_tr, c_rt))
    d_c = (6 * y + u + v) / 8
    na, nb = len(ref_pos), len(test_pos)
    s = (na * covariance(ref_pos, ref_col) + nb * covariance(test_pos, test_col)) / (na + nb)
    s_reg = s + 1e-9 * max(1.0, s[0, 0] + s[1, 1]) * np.eye(2)
    d_g = max(g_tr, g_rt)
    D = unified(d_g, d_c, s_reg)
    return {
        "d_g": d_g, "d_p": max(p_tr, p_rt), "d_cY": y, "d_cU": u, "d_cV": v, "d_c": d_c, "D": D,
        "pc_psnr": math.inf if D == 0 else 10 * math.log10(4 / D),
        "d_g_test_to_ref": g_tr, "d_g_ref_to_test": g_rt,
        "d_p_test_to_ref": p_tr, "d_p_ref_to_test": p_rt,
        "d_c_test_to_ref": (6 * c_tr[0] + c_tr[1] + c_tr[2]) / 8,
        "d_c_ref_to_test": (6 * c_rt[0] + c_rt[1] + c_rt[2]) / 8,
        "cov_ref": covariance(ref_pos, ref_col),
        "cov_test": covariance(test_pos, test_col),
        "cov_raw": s,
    }


def poly_eval(coef_desc, x):
    return np.polyval(np.asarray(coef_desc, dtype=np.float64), x)


def grid_optimum(models, R_hat, lo=2, hi=51):
    """Exhaustive feasible-integer enumeration, written independently of the solver."""
    best = None
    for g in range(lo, hi + 1):
        for c in range(lo, hi + 1):
            R = poly_eval(models.c, g) + poly_eval(models.d, c)
            if R > R_hat:
                continue
            D = poly_eval(models.a, g) + poly_eval(models.b, c)
            if best is None or D < best[2]:
                best = (g, c, float(D))
    return best


def rel_close(a, b, rtol):
    if a == b:
        return True
    return abs(a - b) <= rtol * max(abs(a), abs(b))
