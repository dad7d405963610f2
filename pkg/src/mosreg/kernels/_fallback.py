"""Pure numpy implementations of the hot kernels.

Selected at import time when the compiled extension is unavailable (or
when MOSREG_PURE_PYTHON is set).  Formula structure mirrors the compiled
code so both backends agree to floating-point reassociation.
"""

from __future__ import annotations

import numpy as np

_DIVISOR_FLOOR = 1e-8


def warp_bilinear(src: np.ndarray, m: np.ndarray, out_h: int, out_w: int):
    """Inverse-map every output raster pixel through the 3x3 matrix `m`
    (output raster coords -> source raster coords) and sample bilinearly.

    Returns (out, mask); masked-out pixels hold 0.
    """
    h, w = src.shape
    ys, xs = np.mgrid[0:out_h, 0:out_w].astype(np.float64)
    wdiv = m[2, 0] * xs + m[2, 1] * ys + m[2, 2]
    ok = np.abs(wdiv) >= _DIVISOR_FLOOR
    wsafe = np.where(ok, wdiv, 1.0)
    sx = (m[0, 0] * xs + m[0, 1] * ys + m[0, 2]) / wsafe
    sy = (m[1, 0] * xs + m[1, 1] * ys + m[1, 2]) / wsafe
    ok &= (sx >= 0.0) & (sx <= w - 1.0) & (sy >= 0.0) & (sy <= h - 1.0)

    x0 = np.clip(np.floor(sx).astype(np.int64), 0, w - 2)
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, h - 2)
    fx = sx - x0
    fy = sy - y0
    x0 = np.where(ok, x0, 0)
    y0 = np.where(ok, y0, 0)
    i00 = src[y0, x0]
    i01 = src[y0, x0 + 1]
    i10 = src[y0 + 1, x0]
    i11 = src[y0 + 1, x0 + 1]
    top = i00 * (1.0 - fx) + i01 * fx
    bot = i10 * (1.0 - fx) + i11 * fx
    out = np.where(ok, top * (1.0 - fy) + bot * fy, 0.0)
    return out, ok


def sample_points(img: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Bilinear values plus the interpolant's in-cell derivatives at a set
    of raster points.

    Returns (vals, gx, gy, valid); entries under valid == False hold 0.
    """
    h, w = img.shape
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    ok = (xs >= 0.0) & (xs <= w - 1.0) & (ys >= 0.0) & (ys <= h - 1.0)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 2)
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 2)
    fx = xs - x0
    fy = ys - y0
    x0 = np.where(ok, x0, 0)
    y0 = np.where(ok, y0, 0)
    i00 = img[y0, x0]
    i01 = img[y0, x0 + 1]
    i10 = img[y0 + 1, x0]
    i11 = img[y0 + 1, x0 + 1]
    top = i00 * (1.0 - fx) + i01 * fx
    bot = i10 * (1.0 - fx) + i11 * fx
    vals = np.where(ok, top * (1.0 - fy) + bot * fy, 0.0)
    gx = np.where(ok, (i01 - i00) + fy * ((i11 - i10) - (i01 - i00)), 0.0)
    gy = np.where(ok, (i10 - i00) + fx * ((i11 - i01) - (i10 - i00)), 0.0)
    return vals, gx, gy, ok


def joint_hist(a: np.ndarray, b: np.ndarray, mask: np.ndarray, bins: int):
    """B x B joint intensity counts over mask==True pixels.

    Bin index floor(v * bins / 256) clamped into [0, bins-1]; rows index
    image `a`, columns image `b`.
    """
    av = a[mask]
    bv = b[mask]
    ia = np.clip((av * bins / 256.0).astype(np.int64), 0, bins - 1)
    ib = np.clip((bv * bins / 256.0).astype(np.int64), 0, bins - 1)
    flat = np.bincount(ia * bins + ib, minlength=bins * bins)
    return flat.reshape(bins, bins).astype(np.int64)


def emma_gradient(u_b, v_b, jac_b, u_a, v_a, jac_a, sigma: float):
    """Stochastic mutual-information gradient over sample sets B and A.

    u_* are target intensities, v_* warped-source intensities, jac_* the
    (n, 8) rows dv/dp.  Parzen kernels are Gaussian with width `sigma` in
    gray levels (shared by the marginal and the joint estimate).  Returns
    the 8-vector d(MI)/dp, natural-log convention.
    """
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    dv = v_b[:, None] - v_a[None, :]
    du = u_b[:, None] - u_a[None, :]
    kv = np.exp(-dv * dv * inv2s2)
    kuv = kv * np.exp(-du * du * inv2s2)
    wv = kv / kv.sum(axis=1, keepdims=True)
    wuv = kuv / kuv.sum(axis=1, keepdims=True)
    c = dv * (wv - wuv) / (sigma * sigma)
    gb = c.sum(axis=1) @ jac_b
    ga = c.sum(axis=0) @ jac_a
    return (gb - ga) / float(len(v_b))
