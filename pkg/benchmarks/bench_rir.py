"""Benchmark the image-source accumulation kernel: compiled extension vs the
pure-numpy fallback.

Usage: python benchmarks/bench_rir.py [--repeats N]

The hot loop of the room simulator walks the 3-D image grid, computes a
distance per image, and accumulates an attenuated tap at the rounded delay.
Both backends are timed on identical inputs across a few RIR lengths and the
outputs are cross-checked before reporting.
"""

import argparse
import time

import numpy as np

from beamfilt import _imgsrc_py
from beamfilt.room import KERNEL_BACKEND, image_method_rir

try:
    from beamfilt import _imgsrc

    HAVE_EXT = True
except ImportError:
    HAVE_EXT = False

import beamfilt.room as room_mod

ROOM = (6.0, 5.0, 3.0)
SRC = (2.2, 1.7, 1.5)
MIC = (4.1, 3.3, 1.4)
FS = 16000


def run(core, length_s, repeats):
    room_mod._rir_core = core
    h = image_method_rir(ROOM, 0.8, SRC, MIC, FS, length_s=length_s)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        image_method_rir(ROOM, 0.8, SRC, MIC, FS, length_s=length_s)
        best = min(best, time.perf_counter() - t0)
    return h, best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"import-time backend: {KERNEL_BACKEND}")
    if not HAVE_EXT:
        print("compiled extension unavailable; benchmarking fallback only")

    original = room_mod._rir_core
    try:
        print(f"{'rir len':>8} {'images':>9} {'numpy':>10} {'cython':>10} "
              f"{'speedup':>8}")
        for length_s in (0.1, 0.3, 0.6, 1.0):
            n_per_axis = [
                2 * (int(np.ceil(343.0 * length_s / (2.0 * dim))) + 1) + 1
                for dim in ROOM
            ]
            n_images = 8 * int(np.prod(n_per_axis))
            h_py, t_py = run(_imgsrc_py.rir_core, length_s, args.repeats)
            if HAVE_EXT:
                h_cy, t_cy = run(_imgsrc.rir_core, length_s, args.repeats)
                if not np.allclose(h_py, h_cy, atol=1e-12):
                    raise AssertionError("backend outputs diverge")
                print(f"{length_s:7.1f}s {n_images:9d} {t_py * 1e3:8.2f}ms "
                      f"{t_cy * 1e3:8.2f}ms {t_py / t_cy:7.1f}x")
            else:
                print(f"{length_s:7.1f}s {n_images:9d} {t_py * 1e3:8.2f}ms "
                      f"{'-':>10} {'-':>8}")
    finally:
        room_mod._rir_core = original


if __name__ == "__main__":
    main()
