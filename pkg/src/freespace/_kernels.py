"""Compiled inner loops for the voxel field and the volume renderer.

Everything here works on plain arrays so the public modules can stay
readable numpy code. Grid parameters are laid out as ``(nx, ny, nz, 4)``
float32 with channel 0 the raw density and channels 1..3 the raw color.
Arithmetic is done in float64; gradients accumulate into float64 buffers.

All kernels are serial and release the GIL. Gradient kernels visit rays and
points in input order, so the accumulated buffer is bit-reproducible.
"""

import math

import numba
import numpy as np

_jit = numba.njit(cache=True, nogil=True)


@_jit
def softplus(x):
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@_jit
def sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@_jit
def _axis(v, lo, scale, n):
    u = (v - lo) * scale
    i = int(u)
    if i > n - 2:
        i = n - 2
    return i, u - i


@_jit
def _locate(x, y, z, lo, hi, res):
    """Flat index of the lower cell corner and the fractional offsets.

    Returns base = -1 when the point lies outside the closed domain box.
    """
    if x < lo[0] or x > hi[0] or y < lo[1] or y > hi[1] or z < lo[2] or z > hi[2]:
        return -1, 0.0, 0.0, 0.0
    i, fx = _axis(x, lo[0], (res[0] - 1) / (hi[0] - lo[0]), res[0])
    j, fy = _axis(y, lo[1], (res[1] - 1) / (hi[1] - lo[1]), res[1])
    k, fz = _axis(z, lo[2], (res[2] - 1) / (hi[2] - lo[2]), res[2])
    return (i * res[1] + j) * res[2] + k, fx, fy, fz


@_jit
def _gather(flat, base, fx, fy, fz, sx, sy, out):
    for ch in range(4):
        out[ch] = 0.0
    for di in range(2):
        wx = fx if di else 1.0 - fx
        for dj in range(2):
            wy = fy if dj else 1.0 - fy
            for dk in range(2):
                w = wx * wy * (fz if dk else 1.0 - fz)
                v = base + di * sx + dj * sy + dk
                out[0] += w * flat[v, 0]
                out[1] += w * flat[v, 1]
                out[2] += w * flat[v, 2]
                out[3] += w * flat[v, 3]


@_jit
def _gather_density(flat, base, fx, fy, fz, sx, sy):
    r = 0.0
    for di in range(2):
        wx = fx if di else 1.0 - fx
        for dj in range(2):
            wy = fy if dj else 1.0 - fy
            for dk in range(2):
                r += wx * wy * (fz if dk else 1.0 - fz) * flat[base + di * sx + dj * sy + dk, 0]
    return r


@_jit
def _scatter(g, base, fx, fy, fz, sx, sy, g0, g1, g2, g3):
    for di in range(2):
        wx = fx if di else 1.0 - fx
        for dj in range(2):
            wy = fy if dj else 1.0 - fy
            for dk in range(2):
                w = wx * wy * (fz if dk else 1.0 - fz)
                v = base + di * sx + dj * sy + dk
                g[v, 0] += w * g0
                g[v, 1] += w * g1
                g[v, 2] += w * g2
                g[v, 3] += w * g3


@_jit
def _scatter_density(g, base, fx, fy, fz, sx, sy, g0):
    for di in range(2):
        wx = fx if di else 1.0 - fx
        for dj in range(2):
            wy = fy if dj else 1.0 - fy
            for dk in range(2):
                g[base + di * sx + dj * sy + dk, 0] += wx * wy * (fz if dk else 1.0 - fz) * g0


@_jit
def query_points(params, lo, hi, res, points):
    """Activated sigma, rgb, raw pre-activations and in-domain flags per point."""
    flat = params.reshape(-1, 4)
    sx = res[1] * res[2]
    sy = res[2]
    n = points.shape[0]
    sigma = np.zeros(n)
    rgb = np.zeros((n, 3))
    raw = np.zeros((n, 4))
    inside = np.zeros(n, np.bool_)
    buf = np.empty(4)
    for p in range(n):
        base, fx, fy, fz = _locate(points[p, 0], points[p, 1], points[p, 2], lo, hi, res)
        if base < 0:
            continue
        inside[p] = True
        _gather(flat, base, fx, fy, fz, sx, sy, buf)
        raw[p] = buf
        sigma[p] = softplus(buf[0])
        for ch in range(3):
            rgb[p, ch] = sigmoid(buf[ch + 1])
    return sigma, rgb, raw, inside


@_jit
def query_points_backward(params, lo, hi, res, points, d_sigma, d_rgb, grad):
    """Scatter upstream (d_sigma, d_rgb) at each point into ``grad``."""
    flat = params.reshape(-1, 4)
    g = grad.reshape(-1, 4)
    sx = res[1] * res[2]
    sy = res[2]
    buf = np.empty(4)
    for p in range(points.shape[0]):
        base, fx, fy, fz = _locate(points[p, 0], points[p, 1], points[p, 2], lo, hi, res)
        if base < 0:
            continue
        _gather(flat, base, fx, fy, fz, sx, sy, buf)
        gd = d_sigma[p] * sigmoid(buf[0])
        s1 = sigmoid(buf[1])
        s2 = sigmoid(buf[2])
        s3 = sigmoid(buf[3])
        _scatter(g, base, fx, fy, fz, sx, sy, gd,
                 d_rgb[p, 0] * s1 * (1.0 - s1),
                 d_rgb[p, 1] * s2 * (1.0 - s2),
                 d_rgb[p, 2] * s3 * (1.0 - s3))


@_jit
def fsp_points(params, lo, hi, res, points, scale, grad, accumulate):
    """Sum of sigmoid(sigma)^2 over points; optionally scatter scale * d/d(raw).

    Points outside the domain contribute sigmoid(0)^2 with no gradient, which
    matches the out-of-domain query contract (sigma = 0 there).
    """
    flat = params.reshape(-1, 4)
    g = grad.reshape(-1, 4)
    sx = res[1] * res[2]
    sy = res[2]
    total = 0.0
    for p in range(points.shape[0]):
        base, fx, fy, fz = _locate(points[p, 0], points[p, 1], points[p, 2], lo, hi, res)
        if base < 0:
            total += 0.25
            continue
        r = _gather_density(flat, base, fx, fy, fz, sx, sy)
        s = sigmoid(softplus(r))
        total += s * s
        if accumulate:
            # d(s^2)/d sigma = 2 s^2 (1 - s); d sigma / d raw = sigmoid(raw)
            gr = scale * 2.0 * s * s * (1.0 - s) * sigmoid(r)
            _scatter_density(g, base, fx, fy, fz, sx, sy, gr)
    return total


@_jit
def _ray_samples(flat, lo, hi, res, o, d, t, sig, col, raw, loc, frac):
    sx = res[1] * res[2]
    sy = res[2]
    buf = np.empty(4)
    for i in range(t.shape[0]):
        base, fx, fy, fz = _locate(o[0] + t[i] * d[0], o[1] + t[i] * d[1],
                                   o[2] + t[i] * d[2], lo, hi, res)
        loc[i] = base
        if base < 0:
            sig[i] = 0.0
            col[i, 0] = 0.0
            col[i, 1] = 0.0
            col[i, 2] = 0.0
            continue
        frac[i, 0] = fx
        frac[i, 1] = fy
        frac[i, 2] = fz
        _gather(flat, base, fx, fy, fz, sx, sy, buf)
        raw[i] = buf[0]
        sig[i] = softplus(buf[0])
        for ch in range(3):
            col[i, ch] = sigmoid(buf[ch + 1])


@_jit
def composite_one(sig, col, t, delta, bg, T, w):
    """Alpha-composite one ray. Fills T (length K+1) and w; returns rgb, depth, acc."""
    K = sig.shape[0]
    T[0] = 1.0
    r0 = 0.0
    r1 = 0.0
    r2 = 0.0
    acc = 0.0
    dsum = 0.0
    for i in range(K):
        tau = sig[i] * delta[i]
        wi = T[i] * -math.expm1(-tau)
        w[i] = wi
        T[i + 1] = T[i] * math.exp(-tau)
        acc += wi
        dsum += wi * t[i]
        r0 += wi * col[i, 0]
        r1 += wi * col[i, 1]
        r2 += wi * col[i, 2]
    TK = T[K]
    depth = dsum / max(acc, 1e-8)
    return r0 + TK * bg[0], r1 + TK * bg[1], r2 + TK * bg[2], depth, acc


@_jit
def composite_one_backward(sig, col, t, delta, bg, T, w, acc, depth,
                           gC0, gC1, gC2, gD, gA, d_sig, d_col):
    """Adjoint of composite_one given its cached T and w."""
    K = sig.shape[0]
    TK = T[K]
    # running tails: sum_{k>i} w_k c_k + T_K bg, and sum_{k>i} w_k t_k
    sc0 = TK * bg[0]
    sc1 = TK * bg[1]
    sc2 = TK * bg[2]
    st = 0.0
    big = acc > 1e-8
    denom = acc if big else 1e-8
    for i in range(K - 1, -1, -1):
        Tn = T[i + 1]
        dtau = (gC0 * (Tn * col[i, 0] - sc0) + gC1 * (Tn * col[i, 1] - sc1)
                + gC2 * (Tn * col[i, 2] - sc2) + gA * TK)
        dS = Tn * t[i] - st
        if big:
            dtau += gD * (dS - depth * TK) / denom
        else:
            dtau += gD * dS / denom
        d_sig[i] = dtau * delta[i]
        wi = w[i]
        d_col[i, 0] = wi * gC0
        d_col[i, 1] = wi * gC1
        d_col[i, 2] = wi * gC2
        sc0 += wi * col[i, 0]
        sc1 += wi * col[i, 1]
        sc2 += wi * col[i, 2]
        st += wi * t[i]


@_jit
def render_rays(params, lo, hi, res, origins, dirs, t, delta, bg):
    """Forward render of a ray batch: rgb, expected depth, accumulation, T_K."""
    flat = params.reshape(-1, 4)
    R = origins.shape[0]
    K = t.shape[1]
    rgb = np.zeros((R, 3))
    depth = np.zeros(R)
    acc = np.zeros(R)
    trans = np.zeros(R)
    sig = np.empty(K)
    col = np.empty((K, 3))
    raw = np.empty(K)
    loc = np.empty(K, np.int64)
    frac = np.empty((K, 3))
    T = np.empty(K + 1)
    w = np.empty(K)
    for r in range(R):
        _ray_samples(flat, lo, hi, res, origins[r], dirs[r], t[r], sig, col, raw, loc, frac)
        c0, c1, c2, dp, a = composite_one(sig, col, t[r], delta[r], bg, T, w)
        rgb[r, 0] = c0
        rgb[r, 1] = c1
        rgb[r, 2] = c2
        depth[r] = dp
        acc[r] = a
        trans[r] = T[K]
    return rgb, depth, acc, trans


@_jit
def render_rays_backward(params, lo, hi, res, origins, dirs, t, delta, bg,
                         gC, gD, gA, targets, use_targets, scale, grad):
    """Reverse pass over a ray batch, accumulating into ``grad``.

    With ``use_targets`` the color cotangent is ``scale * 2 (C - target)``
    (the photometric loss) and ``gC`` is ignored. Returns per-ray squared
    color errors (zeros without targets) and the rendered colors.
    """
    flat = params.reshape(-1, 4)
    g = grad.reshape(-1, 4)
    sx = res[1] * res[2]
    sy = res[2]
    R = origins.shape[0]
    K = t.shape[1]
    sq = np.zeros(R)
    rgb_out = np.zeros((R, 3))
    sig = np.empty(K)
    col = np.empty((K, 3))
    raw = np.empty(K)
    loc = np.empty(K, np.int64)
    frac = np.empty((K, 3))
    T = np.empty(K + 1)
    w = np.empty(K)
    d_sig = np.empty(K)
    d_col = np.empty((K, 3))
    for r in range(R):
        _ray_samples(flat, lo, hi, res, origins[r], dirs[r], t[r], sig, col, raw, loc, frac)
        c0, c1, c2, dp, a = composite_one(sig, col, t[r], delta[r], bg, T, w)
        rgb_out[r, 0] = c0
        rgb_out[r, 1] = c1
        rgb_out[r, 2] = c2
        if use_targets:
            e0 = c0 - targets[r, 0]
            e1 = c1 - targets[r, 1]
            e2 = c2 - targets[r, 2]
            sq[r] = e0 * e0 + e1 * e1 + e2 * e2
            g0 = scale * 2.0 * e0
            g1 = scale * 2.0 * e1
            g2 = scale * 2.0 * e2
        else:
            g0 = gC[r, 0]
            g1 = gC[r, 1]
            g2 = gC[r, 2]
        composite_one_backward(sig, col, t[r], delta[r], bg, T, w, a, dp,
                               g0, g1, g2, gD[r], gA[r], d_sig, d_col)
        for i in range(K):
            base = loc[i]
            if base < 0:
                continue
            s1 = col[i, 0]
            s2 = col[i, 1]
            s3 = col[i, 2]
            _scatter(g, base, frac[i, 0], frac[i, 1], frac[i, 2], sx, sy,
                     d_sig[i] * sigmoid(raw[i]),
                     d_col[i, 0] * s1 * (1.0 - s1),
                     d_col[i, 1] * s2 * (1.0 - s2),
                     d_col[i, 2] * s3 * (1.0 - s3))
    return sq, rgb_out


@_jit
def adam_update(params, grads, m, v, step, lr, beta1, beta2, eps):
    """In-place bias-corrected Adam over flat arrays. Returns #skipped entries."""
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    skipped = 0
    for i in range(params.shape[0]):
        gi = grads[i]
        if not np.isfinite(gi):
            skipped += 1
            continue
        mi = beta1 * m[i] + (1.0 - beta1) * gi
        vi = beta2 * v[i] + (1.0 - beta2) * gi * gi
        m[i] = mi
        v[i] = vi
        params[i] = params[i] - lr * (mi / bc1) / (math.sqrt(vi / bc2) + eps)
    return skipped
