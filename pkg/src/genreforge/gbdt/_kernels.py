"""Sequential numba kernels for histogram split finding.

Kept free of threading so that fitted trees are bit-identical regardless of
the host machine; the Python layer owns all tie-breaking (lowest feature
index, then lowest threshold, via strictly-greater gain comparisons in
feature-ascending, bin-ascending scan order).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def build_histograms(codes, rows, grad, hess, max_bins):
    """Per-(feature, bin) sums of gradient, hessian, and count over rows."""
    d = codes.shape[1]
    hist_g = np.zeros((d, max_bins))
    hist_h = np.zeros((d, max_bins))
    hist_c = np.zeros((d, max_bins), dtype=np.int64)
    for ii in range(rows.shape[0]):
        i = rows[ii]
        g = grad[i]
        h = hess[i]
        for j in range(d):
            b = codes[i, j]
            hist_g[j, b] += g
            hist_h[j, b] += h
            hist_c[j, b] += 1
    return hist_g, hist_h, hist_c


@njit(cache=True)
def best_split_scan(hist_g, hist_h, hist_c, n_bins, g_sum, count, min_samples_leaf, min_gain):
    """Best boundary by squared-error reduction GL^2/CL + GR^2/CR - G^2/C.

    Returns (feature, boundary_bin, gain, left_g, left_h, left_count);
    feature is -1 when no admissible boundary improves on the parent.
    """
    d = hist_g.shape[0]
    parent_score = g_sum * g_sum / count
    best_gain = min_gain
    best_f = -1
    best_b = -1
    best_gl = 0.0
    best_hl = 0.0
    best_cl = 0
    for j in range(d):
        gl = 0.0
        hl = 0.0
        cl = 0
        last = n_bins[j] - 1
        for b in range(last):
            gl += hist_g[j, b]
            hl += hist_h[j, b]
            cl += hist_c[j, b]
            cr = count - cl
            if cr < min_samples_leaf:
                break
            if cl < min_samples_leaf:
                continue
            gr = g_sum - gl
            gain = gl * gl / cl + gr * gr / cr - parent_score
            if gain > best_gain:
                best_gain = gain
                best_f = j
                best_b = b
                best_gl = gl
                best_hl = hl
                best_cl = cl
    return best_f, best_b, best_gain, best_gl, best_hl, best_cl
