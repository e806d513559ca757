"""Time the numba and numpy kernel paths side by side.

    python benchmarks/bench_kernels.py [--n-points 1024] [--repeat 200]

Reports the best-of-N time per call for each kernel and for a full
split-operator step (Rabi model, two channels). Results of the two paths
are checked for agreement before timing.
"""
import argparse
import timeit

import numpy as np

from cavitywp import _kernels
from cavitywp.grid import make_grid
from cavitywp.models import ModelSpec, split_for
from cavitywp.propagator import SplitOperatorPropagator, expm_channel
from cavitywp.states import coherent_state, compose_initial


def random_unitaries(rng, n_channels, n_points):
    a = rng.normal(size=(n_points, n_channels, n_channels)) + 1j * rng.normal(
        size=(n_points, n_channels, n_channels)
    )
    h = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    return np.ascontiguousarray(np.moveaxis(expm_channel(h, 0.1), 0, -1))


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_kernels(n_points, repeat, rng):
    rows = []
    x = np.linspace(-10, 10, n_points)
    for n_ch in (2, 3):
        mats = random_unitaries(rng, n_ch, n_points)
        amps = rng.normal(size=(n_ch, n_points)) + 1j * rng.normal(size=(n_ch, n_points))
        ref = _kernels.IMPLEMENTATIONS["numpy"]["apply_pointwise"](mats, amps, np.empty_like(amps))
        for name, impl in _kernels.IMPLEMENTATIONS.items():
            f = impl["apply_pointwise"]
            out = np.empty_like(amps)
            assert np.allclose(f(mats, amps, out), ref, rtol=0, atol=1e-12)
            rows.append((f"apply_pointwise C={n_ch}", name, best_of(lambda: f(mats, amps, out), repeat, 20)))
    amps = rng.normal(size=(2, n_points)) + 1j * rng.normal(size=(2, n_points))
    for name, impl in _kernels.IMPLEMENTATIONS.items():
        f = impl["channel_moments"]
        rows.append(("channel_moments", name, best_of(lambda: f(amps, x), repeat, 20)))
    series = np.cos(np.linspace(0, 60, 20 * n_points))
    for name, impl in _kernels.IMPLEMENTATIONS.items():
        f = impl["sliding_range"]
        rows.append(("sliding_range", name, best_of(lambda: f(series, 50), max(repeat // 20, 3), 1)))
    return rows


def bench_step(n_points, repeat):
    grid = make_grid(n_points, 20.0)
    split = split_for(ModelSpec("rabi", omega=5.0, g0=0.15))
    prop = SplitOperatorPropagator(split, grid, 2.5e-4)
    psi0 = compose_initial(coherent_state(3.0, grid), [1.0, 0.0], grid).channels
    rows, finals = [], {}
    saved = _kernels.apply_pointwise
    try:
        for name, impl in _kernels.IMPLEMENTATIONS.items():
            _kernels.apply_pointwise = impl["apply_pointwise"]
            finals[name] = prop.advance(psi0.copy(), 100)
            rows.append(("strang step", name, best_of(lambda: prop.advance(psi0.copy(), 100), max(repeat // 20, 3), 1) / 100))
    finally:
        _kernels.apply_pointwise = saved
    if len(finals) == 2:
        assert np.allclose(finals["numba"], finals["numpy"], rtol=0, atol=1e-12)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-points", type=int, default=1024)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)
    if "numba" not in _kernels.IMPLEMENTATIONS:
        print("numba is not importable; only the numpy path is timed")
    rng = np.random.default_rng(7)
    rows = bench_kernels(args.n_points, args.repeat, rng) + bench_step(args.n_points, args.repeat)
    print(f"active backend: {_kernels.BACKEND}; n_points = {args.n_points}")
    print(f"{'kernel':<24}{'path':<8}{'time/call':>14}")
    for kernel, name, t in rows:
        print(f"{kernel:<24}{name:<8}{t * 1e6:>11.2f} us")


if __name__ == "__main__":
    main()
