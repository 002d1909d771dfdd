"""Hot raster kernels: projective bilinear warping and alpha compositing.

Both kernels exist twice: a numba @njit version (default) and a pure-numpy
fallback. Setting the environment variable GROUPMOOD_NO_NUMBA=1 selects the
numpy path; it is also used automatically when numba is not importable. The
two paths use identical expression trees over float64 so their outputs are
bit-identical — scripts/benchmark_kernels.py times both and asserts agreement.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

NUMBA_ENABLED = HAS_NUMBA and os.environ.get("GROUPMOOD_NO_NUMBA", "0") != "1"

_NO_DISP = np.zeros((1, 1, 2), dtype=np.float64)


def _warp_bilinear_np(src, inv, out_h, out_w, ox, oy, disp, has_disp):
    h, w = src.shape[0], src.shape[1]
    ys, xs = np.meshgrid(
        np.arange(out_h, dtype=np.float64),
        np.arange(out_w, dtype=np.float64),
        indexing="ij",
    )
    if has_disp:
        px = (xs + float(ox)) + disp[:, :, 0]
        py = (ys + float(oy)) + disp[:, :, 1]
    else:
        px = xs + float(ox)
        py = ys + float(oy)
    denom = inv[2, 0] * px + inv[2, 1] * py + inv[2, 2]
    sx = (inv[0, 0] * px + inv[0, 1] * py + inv[0, 2]) / denom
    sy = (inv[1, 0] * px + inv[1, 1] * py + inv[1, 2]) / denom

    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    ix = x0.astype(np.int64)
    iy = y0.astype(np.int64)

    def gather(iyy, ixx):
        inside = (ixx >= 0) & (ixx < w) & (iyy >= 0) & (iyy < h)
        vals = src[np.clip(iyy, 0, h - 1), np.clip(ixx, 0, w - 1), :]
        return np.where(inside[:, :, None], vals, 0.0)

    v00 = gather(iy, ix)
    v01 = gather(iy, ix + 1)
    v10 = gather(iy + 1, ix)
    v11 = gather(iy + 1, ix + 1)

    gx = (1.0 - fx)[:, :, None]
    gy = (1.0 - fy)[:, :, None]
    fx = fx[:, :, None]
    fy = fy[:, :, None]
    top = v00 * gx + v01 * fx
    bot = v10 * gx + v11 * fx
    return top * gy + bot * fy


def _composite_np(canvas, face, alpha, x0, y0):
    h, w = alpha.shape
    region = canvas[y0 : y0 + h, x0 : x0 + w, :].astype(np.float64)
    a = alpha[:, :, None]
    out = face * a + region * (1.0 - a)
    canvas[y0 : y0 + h, x0 : x0 + w, :] = np.rint(out).astype(np.uint8)


if HAS_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _warp_bilinear_jit(src, inv, out, ox, oy, disp, has_disp):
        h, w, nc = src.shape
        out_h, out_w = out.shape[0], out.shape[1]
        for y in range(out_h):
            for x in range(out_w):
                if has_disp:
                    px = float(x + ox) + disp[y, x, 0]
                    py = float(y + oy) + disp[y, x, 1]
                else:
                    px = float(x + ox)
                    py = float(y + oy)
                denom = inv[2, 0] * px + inv[2, 1] * py + inv[2, 2]
                sx = (inv[0, 0] * px + inv[0, 1] * py + inv[0, 2]) / denom
                sy = (inv[1, 0] * px + inv[1, 1] * py + inv[1, 2]) / denom
                x0f = np.floor(sx)
                y0f = np.floor(sy)
                fx = sx - x0f
                fy = sy - y0f
                ix = int(x0f)
                iy = int(y0f)
                gx = 1.0 - fx
                gy = 1.0 - fy
                for c in range(nc):
                    v00 = 0.0
                    v01 = 0.0
                    v10 = 0.0
                    v11 = 0.0
                    if 0 <= iy < h:
                        if 0 <= ix < w:
                            v00 = src[iy, ix, c]
                        if 0 <= ix + 1 < w:
                            v01 = src[iy, ix + 1, c]
                    if 0 <= iy + 1 < h:
                        if 0 <= ix < w:
                            v10 = src[iy + 1, ix, c]
                        if 0 <= ix + 1 < w:
                            v11 = src[iy + 1, ix + 1, c]
                    top = v00 * gx + v01 * fx
                    bot = v10 * gx + v11 * fx
                    out[y, x, c] = top * gy + bot * fy

    @numba.njit(cache=True, nogil=True)
    def _composite_jit(canvas, face, alpha, x0, y0):
        h, w = alpha.shape
        for j in range(h):
            for i in range(w):
                a = alpha[j, i]
                for c in range(3):
                    bg = float(canvas[y0 + j, x0 + i, c])
                    out = face[j, i, c] * a + bg * (1.0 - a)
                    canvas[y0 + j, x0 + i, c] = np.uint8(np.rint(out))


def warp_bilinear_numpy(src, inv, out_h, out_w, ox=0, oy=0, disp=None):
    """Pure-numpy inverse-mapped projective warp with bilinear sampling.

    src is (H, W, C) float64; inv maps output coordinates (plus the (ox, oy)
    canvas offset and optional per-pixel displacement field) back into source
    pixel-center coordinates. Samples falling outside the source are 0.
    """
    src = np.ascontiguousarray(src, dtype=np.float64)
    inv = np.ascontiguousarray(inv, dtype=np.float64)
    has_disp = disp is not None
    d = np.ascontiguousarray(disp, dtype=np.float64) if has_disp else _NO_DISP
    return _warp_bilinear_np(src, inv, int(out_h), int(out_w), int(ox), int(oy), d, has_disp)


def warp_bilinear_numba(src, inv, out_h, out_w, ox=0, oy=0, disp=None):
    """Numba-compiled variant of warp_bilinear_numpy; same output bit-for-bit."""
    if not HAS_NUMBA:
        raise RuntimeError("numba is not available")
    src = np.ascontiguousarray(src, dtype=np.float64)
    inv = np.ascontiguousarray(inv, dtype=np.float64)
    has_disp = disp is not None
    d = np.ascontiguousarray(disp, dtype=np.float64) if has_disp else _NO_DISP
    out = np.empty((int(out_h), int(out_w), src.shape[2]), dtype=np.float64)
    _warp_bilinear_jit(src, inv, out, int(ox), int(oy), d, has_disp)
    return out


def composite_over_numpy(canvas, face, alpha, x0, y0):
    """Alpha-composite face (float64 RGB) over a uint8 canvas region, in place."""
    _composite_np(
        canvas,
        np.ascontiguousarray(face, dtype=np.float64),
        np.ascontiguousarray(alpha, dtype=np.float64),
        int(x0),
        int(y0),
    )


def composite_over_numba(canvas, face, alpha, x0, y0):
    if not HAS_NUMBA:
        raise RuntimeError("numba is not available")
    _composite_jit(
        canvas,
        np.ascontiguousarray(face, dtype=np.float64),
        np.ascontiguousarray(alpha, dtype=np.float64),
        int(x0),
        int(y0),
    )


if NUMBA_ENABLED:
    warp_bilinear = warp_bilinear_numba
    composite_over = composite_over_numba
else:
    warp_bilinear = warp_bilinear_numpy
    composite_over = composite_over_numpy


def resize_bilinear(src, out_w, out_h):
    """Resize an (H, W, C) float64 raster; exact no-op when sizes are unchanged."""
    h, w = src.shape[0], src.shape[1]
    sx = (w - 1) / (out_w - 1) if out_w > 1 else 0.0
    sy = (h - 1) / (out_h - 1) if out_h > 1 else 0.0
    inv = np.array([[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]])
    return warp_bilinear(src, inv, out_h, out_w)


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
