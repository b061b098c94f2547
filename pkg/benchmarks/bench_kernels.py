"""Compare the compiled and numpy patch kernels, alone and inside the denoiser.

    python3 benchmarks/bench_kernels.py --batch 4 --height 128 --width 32
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mmwce import kernels
from mmwce.denoiser import backward, forward, init_weights


def best_of(fn, repeat, number=1):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_times(backend, x, repeat):
    k = kernels.get_backend(backend)
    B, H, W, C = x.shape
    cols = k.im2col3x3(x)
    return best_of(lambda: k.im2col3x3(x), repeat), best_of(lambda: k.col2im3x3(cols, B, H, W, C), repeat)


def network_times(args):
    """Denoiser forward/backward in a child process pinned to one backend."""
    out = {}
    for backend in sorted(kernels.BACKENDS):
        env = dict(os.environ, MMWCE_KERNELS=backend if backend == "python" else "")
        cmd = [sys.executable, __file__, "--network-only", "--batch", str(args.batch),
               "--height", str(args.height), "--width", str(args.width), "--repeat", str(args.repeat)]
        res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        out[backend] = [float(v) for v in res.stdout.split()]
    return out


def _network_only(args):
    rng = np.random.default_rng(0)
    w = init_weights(rng, image_shape=[args.height, args.width])
    x = np.abs(rng.standard_normal((args.batch, args.height, args.width))).astype(np.float32)
    g = np.zeros_like(x)
    fwd = best_of(lambda: forward(w, x), args.repeat)
    bwd = best_of(lambda: backward(w, x, g), max(1, args.repeat // 2))
    print(fwd, bwd)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=4)
    ap.add_argument("--height", type=int, default=128)
    ap.add_argument("--width", type=int, default=32)
    ap.add_argument("--channels", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--network-only", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.network_only:
        _network_only(args)
        return

    x = np.random.default_rng(1).standard_normal(
        (args.batch, args.height, args.width, args.channels)).astype(np.float32)
    print(f"shape B={args.batch} H={args.height} W={args.width} C={args.channels}; "
          f"backends {sorted(kernels.BACKENDS)}; active {kernels.BACKEND}")
    print(f"{'backend':<8} {'im2col ms':>10} {'col2im ms':>10} {'fwd ms':>9} {'fwd+bwd ms':>11}")
    net = network_times(args)
    for backend in sorted(kernels.BACKENDS):
        i2c, c2i = kernel_times(backend, x, args.repeat)
        fwd, bwd = net[backend]
        print(f"{backend:<8} {i2c * 1e3:10.2f} {c2i * 1e3:10.2f} {fwd * 1e3:9.1f} {bwd * 1e3:11.1f}")


if __name__ == "__main__":
    main()
