"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--sizes 64 128 256]

Each row reports the best of ``--repeat`` runs and checks that both
backends return identical results.
"""
import argparse
import timeit

import numpy as np

from wsscues import _backend
from wsscues.lattice import PermutohedralLattice
from wsscues.superpixel import FelzParams, grid_edges, smooth


def _scene(size, seed=0):
    r = np.random.default_rng(seed)
    img = np.zeros((size, size, 3), dtype=np.float64)
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(6):
        cy, cx, rad = r.integers(0, size, 2).tolist() + [r.integers(size // 8, size // 3)]
        img[(yy - cy) ** 2 + (xx - cx) ** 2 < rad**2] = r.integers(0, 256, 3)
    img += r.normal(0, 8, img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def bench_fh(kernels, size, repeat):
    img = _scene(size)
    p = FelzParams()
    a, b, w = grid_edges(smooth(img, p.sigma))
    order = np.argsort(w, kind="stable")
    args = (a[order], b[order], w[order], size * size, p.k, p.min_size)
    t = min(timeit.repeat(lambda: kernels.fh_merge(*args), number=1, repeat=repeat))
    return t, kernels.fh_merge(*args)


def bench_lattice(name, size, repeat):
    img = _scene(size)
    ys, xs = np.mgrid[0:size, 0:size]
    feats = np.hstack([np.stack([ys.ravel(), xs.ravel()], 1) / 80.0, img.reshape(-1, 3) / 13.0])
    values = np.random.default_rng(1).random((size * size, 4))
    t_build = min(timeit.repeat(lambda: PermutohedralLattice(feats, backend=name), number=1, repeat=repeat))
    lat = PermutohedralLattice(feats, backend=name)
    t_filter = min(timeit.repeat(lambda: lat.filter(values), number=1, repeat=repeat))
    return t_build, t_filter, lat.filter(values)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    args = ap.parse_args(argv)
    names = _backend.available()
    print(f"backends: {', '.join(names)}")
    print(f"{'kernel':<22}{'size':>6}" + "".join(f"{n + ' (s)':>14}" for n in names) + f"{'speedup':>10}{'equal':>7}")
    for size in args.sizes:
        fh = {n: bench_fh(_backend.get(n), size, args.repeat) for n in names}
        lat = {n: bench_lattice(n, size, args.repeat) for n in names}
        rows = [
            ("felzenszwalb merge", {n: fh[n][0] for n in names}, {n: fh[n][1] for n in names}),
            ("lattice build (5-D)", {n: lat[n][0] for n in names}, None),
            ("lattice filter (V=4)", {n: lat[n][1] for n in names}, {n: lat[n][2] for n in names}),
        ]
        for label, times, outputs in rows:
            cells = "".join(f"{times[n]:14.4f}" for n in names)
            speed = times["python"] / times[names[0]] if len(names) > 1 else 1.0
            same = "-" if outputs is None else str(all(np.array_equal(outputs[names[0]], o) for o in outputs.values()))
            print(f"{label:<22}{size:>6}{cells}{speed:10.1f}x{same:>7}")


if __name__ == "__main__":
    main()
