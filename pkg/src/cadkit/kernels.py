"""Hot inner-loop kernels, in two interchangeable flavours.

Each integer/boolean kernel has a numba ``@njit`` loop version
(``*_numba``) and a vectorized numpy version (``*_numpy``); the pair is
exactly equivalent (integer/boolean arithmetic, no reassociation), and
the module-level name dispatches to whichever :mod:`cadkit._accel`
selected. The SMO float kernel is written once in njit-able style and
runs compiled or interpreted from the same source, so both paths share
one arithmetic sequence.

Set ``CADKIT_NO_NUMBA=1`` to force the numpy path;
``benchmarks/bench_kernels.py`` times the two side by side.
"""

import numpy as np

from ._accel import NUMBA_ENABLED, maybe_njit

if NUMBA_ENABLED:
    from numba import njit
else:
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap


# ---------------------------------------------------------------------------
# GLCM pair counting
# ---------------------------------------------------------------------------

@njit(cache=True)
def glcm_counts_numba(bins, d_row, d_col, levels):
    """Tally ordered co-occurrence pairs at one offset.

    ``bins`` holds the quantized gray level per pixel, -1 outside the ROI.
    """
    h, w = bins.shape
    counts = np.zeros((levels, levels), dtype=np.int64)
    for r in range(h):
        r2 = r + d_row
        if r2 < 0 or r2 >= h:
            continue
        for c in range(w):
            a = bins[r, c]
            if a < 0:
                continue
            c2 = c + d_col
            if c2 < 0 or c2 >= w:
                continue
            b = bins[r2, c2]
            if b < 0:
                continue
            counts[a, b] += 1
    return counts


def glcm_counts_numpy(bins, d_row, d_col, levels):
    h, w = bins.shape
    r0, r1 = max(0, -d_row), min(h, h - d_row)
    c0, c1 = max(0, -d_col), min(w, w - d_col)
    if r0 >= r1 or c0 >= c1:
        return np.zeros((levels, levels), dtype=np.int64)
    src = bins[r0:r1, c0:c1]
    dst = bins[r0 + d_row:r1 + d_row, c0 + d_col:c1 + d_col]
    valid = (src >= 0) & (dst >= 0)
    flat = src[valid].astype(np.int64) * levels + dst[valid]
    return np.bincount(flat, minlength=levels * levels).reshape(levels, levels)


# ---------------------------------------------------------------------------
# Binary morphology
# ---------------------------------------------------------------------------

@njit(cache=True)
def dilate_numba(bits, offsets):
    h, w = bits.shape
    out = np.zeros((h, w), dtype=np.bool_)
    k = offsets.shape[0]
    for r in range(h):
        for c in range(w):
            if not bits[r, c]:
                continue
            for i in range(k):
                r2 = r + offsets[i, 0]
                c2 = c + offsets[i, 1]
                if 0 <= r2 < h and 0 <= c2 < w:
                    out[r2, c2] = True
    return out


@njit(cache=True)
def erode_numba(bits, offsets):
    h, w = bits.shape
    out = np.zeros((h, w), dtype=np.bool_)
    k = offsets.shape[0]
    for r in range(h):
        for c in range(w):
            keep = True
            for i in range(k):
                r2 = r + offsets[i, 0]
                c2 = c + offsets[i, 1]
                if r2 < 0 or r2 >= h or c2 < 0 or c2 >= w or not bits[r2, c2]:
                    keep = False
                    break
            if keep:
                out[r, c] = True
    return out


def _shifted(bits, d_row, d_col):
    """Translate by (d_row, d_col), filling vacated cells with False."""
    h, w = bits.shape
    out = np.zeros((h, w), dtype=bool)
    r0, r1 = max(0, d_row), min(h, h + d_row)
    c0, c1 = max(0, d_col), min(w, w + d_col)
    if r0 >= r1 or c0 >= c1:
        return out
    out[r0:r1, c0:c1] = bits[r0 - d_row:r1 - d_row, c0 - d_col:c1 - d_col]
    return out


def dilate_numpy(bits, offsets):
    out = np.zeros_like(bits, dtype=bool)
    for d_row, d_col in offsets:
        out |= _shifted(bits, int(d_row), int(d_col))
    return out


def erode_numpy(bits, offsets):
    out = np.ones_like(bits, dtype=bool)
    for d_row, d_col in offsets:
        out &= _shifted(bits, -int(d_row), -int(d_col))
    return out


# ---------------------------------------------------------------------------
# Connected-component labeling (4-connected)
# ---------------------------------------------------------------------------

@njit(cache=True)
def label_components_numba(bits):
    """Label 4-connected components 1..n in raster order of first pixel."""
    h, w = bits.shape
    labels = np.zeros((h, w), dtype=np.int32)
    stack = np.empty(h * w, dtype=np.int64)
    count = 0
    for r0 in range(h):
        for c0 in range(w):
            if not bits[r0, c0] or labels[r0, c0] != 0:
                continue
            count += 1
            top = 0
            stack[0] = r0 * w + c0
            labels[r0, c0] = count
            while top >= 0:
                pos = stack[top]
                top -= 1
                r = pos // w
                c = pos % w
                if r > 0 and bits[r - 1, c] and labels[r - 1, c] == 0:
                    labels[r - 1, c] = count
                    top += 1
                    stack[top] = pos - w
                if r + 1 < h and bits[r + 1, c] and labels[r + 1, c] == 0:
                    labels[r + 1, c] = count
                    top += 1
                    stack[top] = pos + w
                if c > 0 and bits[r, c - 1] and labels[r, c - 1] == 0:
                    labels[r, c - 1] = count
                    top += 1
                    stack[top] = pos - 1
                if c + 1 < w and bits[r, c + 1] and labels[r, c + 1] == 0:
                    labels[r, c + 1] = count
                    top += 1
                    stack[top] = pos + 1
    return labels, count


def label_components_numpy(bits):
    h, w = bits.shape
    labels = np.zeros((h, w), dtype=np.int32)
    remaining = bits.astype(bool).copy()
    flat = remaining.ravel()
    count = 0
    while True:
        idx = int(flat.argmax())
        if not flat[idx]:
            break
        count += 1
        comp = np.zeros((h, w), dtype=bool)
        comp[idx // w, idx % w] = True
        frontier = comp.copy()
        while frontier.any():
            grow = (
                _shifted(frontier, 1, 0)
                | _shifted(frontier, -1, 0)
                | _shifted(frontier, 0, 1)
                | _shifted(frontier, 0, -1)
            )
            grow &= remaining & ~comp
            comp |= grow
            frontier = grow
        labels[comp] = count
        remaining &= ~comp
    return labels, count


# ---------------------------------------------------------------------------
# SMO dual optimizer (one source, compiled or interpreted)
# ---------------------------------------------------------------------------

def _smo_core(K, y, C, tol, max_iter):
    """Maximal-violating-pair optimization of the soft-margin dual.

    ``K`` is the precomputed linear Gram matrix, ``y`` is +/-1. The error
    cache is kept bias-free (F_i = sum_j a_j y_j K_ij - y_i); each step
    pairs the extreme violators and stops when their gap drops below
    2*tol. Returns (alphas, bias). Fully deterministic.
    """
    n = K.shape[0]
    alphas = np.zeros(n, dtype=np.float64)
    F = -y.astype(np.float64)
    Kd = np.empty(n, dtype=np.float64)
    for k in range(n):
        Kd[k] = K[k, k]
    pos = y > 0.0
    neg = ~pos
    for _ in range(max_iter):
        up_mask = (pos & (alphas < C)) | (neg & (alphas > 0.0))
        low_mask = (pos & (alphas > 0.0)) | (neg & (alphas < C))
        f_up = np.where(up_mask, F, np.inf)
        f_low = np.where(low_mask, F, -np.inf)
        j = int(np.argmin(f_up))
        i = int(np.argmax(f_low))
        b_up = f_up[j]
        b_low = f_low[i]
        if not up_mask.any() or not low_mask.any() or b_low - b_up <= 2.0 * tol:
            break
        eta = Kd[i] + Kd[j] - 2.0 * K[i, j]
        if eta <= 1e-12:
            # Degenerate direction (duplicate points): next best violator.
            curve = Kd[i] + Kd - 2.0 * K[i]
            gain = F[i] - F
            usable = up_mask & (curve > 1e-12) & (gain > tol)
            usable[i] = False
            if not usable.any():
                break
            j = int(np.argmax(np.where(usable, gain, -np.inf)))
            eta = Kd[i] + Kd[j] - 2.0 * K[i, j]
        ai_old = alphas[i]
        aj_old = alphas[j]
        if y[i] != y[j]:
            L = max(0.0, aj_old - ai_old)
            H = min(C, C + aj_old - ai_old)
        else:
            L = max(0.0, ai_old + aj_old - C)
            H = min(C, ai_old + aj_old)
        if L >= H:
            break
        aj_new = aj_old + y[j] * (F[i] - F[j]) / eta
        if aj_new > H:
            aj_new = H
        elif aj_new < L:
            aj_new = L
        if abs(aj_new - aj_old) < 1e-15 * (abs(aj_new) + abs(aj_old) + 1e-15):
            break
        ai_new = ai_old + y[i] * y[j] * (aj_old - aj_new)
        di = y[i] * (ai_new - ai_old)
        dj = y[j] * (aj_new - aj_old)
        F += di * K[i]
        F += dj * K[j]
        alphas[i] = ai_new
        alphas[j] = aj_new
    # Bias from free support vectors when any exist, else the gap midpoint.
    free = (alphas > 1e-9) & (alphas < C * (1.0 - 1e-9))
    if free.any():
        b = -float(F[free].mean())
    else:
        up_mask = (pos & (alphas < C)) | (neg & (alphas > 0.0))
        low_mask = (pos & (alphas > 0.0)) | (neg & (alphas < C))
        hi = float(np.where(low_mask, F, -np.inf).max()) if low_mask.any() else 0.0
        lo = float(np.where(up_mask, F, np.inf).min()) if up_mask.any() else 0.0
        b = -0.5 * (hi + lo)
    return alphas, b


smo_core = maybe_njit(_smo_core)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    glcm_counts = glcm_counts_numba
    dilate = dilate_numba
    erode = erode_numba
    label_components = label_components_numba
else:
    glcm_counts = glcm_counts_numpy
    dilate = dilate_numpy
    erode = erode_numpy
    label_components = label_components_numpy
