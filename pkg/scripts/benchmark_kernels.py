#!/usr/bin/env python3
"""Benchmark the numba JIT raster kernels against the pure-numpy fallback.

The fallback is what you get with GROUPMOOD_NO_NUMBA=1; this script times both
paths on the two hot kernels (projective bilinear warp, alpha compositing) and
checks that their outputs agree bit-for-bit.

Usage:
    python scripts/benchmark_kernels.py [--size N] [--faces N] [--iters N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from groupmood import kernels


def make_inputs(size, face, rng):
    src = rng.uniform(0, 255, (face, face, 4))
    th = np.deg2rad(12.0)
    mat = np.array(
        [
            [np.cos(th), -np.sin(th), 3.0],
            [np.sin(th), np.cos(th), -2.0],
            [1e-4, -8e-5, 1.0],
        ]
    )
    inv = np.linalg.inv(mat)
    disp = rng.uniform(-2, 2, (face + 16, face + 16, 2))
    canvas = rng.integers(0, 256, (size, size, 3), dtype=np.uint8)
    face_rgb = rng.uniform(0, 255, (face, face, 3))
    alpha = rng.uniform(0, 1, (face, face))
    return src, inv, disp, canvas, face_rgb, alpha


def timeit(fn, iters):
    best = np.inf
    for _ in range(iters):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description="Benchmark warp/composite kernels")
    parser.add_argument("--size", type=int, default=512, help="canvas size (default 512)")
    parser.add_argument("--faces", type=int, default=160, help="face raster size (default 160)")
    parser.add_argument("--iters", type=int, default=30, help="timing iterations (default 30)")
    args = parser.parse_args()

    if not kernels.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(42)
    src, inv, disp, canvas, face_rgb, alpha = make_inputs(args.size, args.faces, rng)
    oh, ow = args.faces + 16, args.faces + 16

    print(f"warming up JIT (size={args.size}, face={args.faces})...")
    t0 = time.perf_counter()
    kernels.warp_bilinear_numba(src, inv, oh, ow, -8, -8, disp)
    kernels.composite_over_numba(canvas.copy(), face_rgb, alpha, 10, 10)
    print(f"  compile+first call: {time.perf_counter() - t0:.2f}s\n")

    rng_canvas = rng.uniform(0, 255, (args.size, args.size, 3))
    cases = [
        (
            "warp (projective+elastic)",
            lambda: kernels.warp_bilinear_numpy(src, inv, oh, ow, -8, -8, disp),
            lambda: kernels.warp_bilinear_numba(src, inv, oh, ow, -8, -8, disp),
        ),
        (
            "warp (affine, canvas-size)",
            lambda: kernels.warp_bilinear_numpy(
                rng_canvas, np.diag([0.9, 0.9, 1.0]), args.size, args.size
            ),
            lambda: kernels.warp_bilinear_numba(
                rng_canvas, np.diag([0.9, 0.9, 1.0]), args.size, args.size
            ),
        ),
        (
            "composite (face onto canvas)",
            lambda: kernels.composite_over_numpy(canvas.copy(), face_rgb, alpha, 10, 10),
            lambda: kernels.composite_over_numba(canvas.copy(), face_rgb, alpha, 10, 10),
        ),
    ]

    print(f"{'kernel':<30s} {'numpy (ms)':>12s} {'numba (ms)':>12s} {'speedup':>9s}")
    print("-" * 66)
    for name, np_fn, nb_fn in cases:
        t_np = timeit(np_fn, args.iters)
        t_nb = timeit(nb_fn, args.iters)
        print(f"{name:<30s} {t_np * 1e3:>12.3f} {t_nb * 1e3:>12.3f} {t_np / t_nb:>8.2f}x")

    a = kernels.warp_bilinear_numpy(src, inv, oh, ow, -8, -8, disp)
    b = kernels.warp_bilinear_numba(src, inv, oh, ow, -8, -8, disp)
    c1, c2 = canvas.copy(), canvas.copy()
    kernels.composite_over_numpy(c1, face_rgb, alpha, 10, 10)
    kernels.composite_over_numba(c2, face_rgb, alpha, 10, 10)
    agree = np.array_equal(a, b) and np.array_equal(c1, c2)
    print(f"\nbitwise agreement: {'OK' if agree else 'MISMATCH'}")
    if not agree:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
