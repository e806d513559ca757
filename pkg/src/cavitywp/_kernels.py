"""Hot inner loops, each with a numba path and a plain numpy path.

The numba versions are used when numba imports and the environment variable
``CAVITYWP_DISABLE_NUMBA`` is unset (or falsy). Both paths compute the same
thing; ``IMPLEMENTATIONS`` exposes them side by side for tests and the
benchmark script.
"""
import os

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None


def _env_disables_numba():
    flag = os.environ.get("CAVITYWP_DISABLE_NUMBA", "").strip().lower()
    return flag not in ("", "0", "false", "no", "off")


USE_NUMBA = njit is not None and not _env_disables_numba()


# ---------------------------------------------------------------- numpy path

def _apply_pointwise_numpy(mats, amps, out):
    """out[c, j] = sum_d mats[c, d, j] * amps[d, j]."""
    if mats.shape[0] == 2:
        a0 = amps[0]
        a1 = amps[1]
        r0 = mats[0, 0] * a0 + mats[0, 1] * a1
        out[1] = mats[1, 0] * a0 + mats[1, 1] * a1
        out[0] = r0
    else:
        out[...] = np.einsum("cdj,dj->cj", mats, amps)
    return out


def _channel_moments_numpy(amps, weights):
    dens = amps.real**2 + amps.imag**2
    return np.stack([dens.sum(axis=1), dens @ weights], axis=1)


def _sliding_range_numpy(values, half_width):
    padded = np.pad(values, half_width, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, 2 * half_width + 1)
    return windows.max(axis=1) - windows.min(axis=1)


# ---------------------------------------------------------------- numba path

def _apply_pointwise_loop(mats, amps, out):
    n_ch = mats.shape[0]
    n_pts = amps.shape[1]
    if n_ch == 2:
        for j in range(n_pts):
            a0 = amps[0, j]
            a1 = amps[1, j]
            out[0, j] = mats[0, 0, j] * a0 + mats[0, 1, j] * a1
            out[1, j] = mats[1, 0, j] * a0 + mats[1, 1, j] * a1
        return out
    buf = np.empty(n_ch, dtype=np.complex128)
    for j in range(n_pts):
        for c in range(n_ch):
            acc = 0j
            for d in range(n_ch):
                acc += mats[c, d, j] * amps[d, j]
            buf[c] = acc
        for c in range(n_ch):
            out[c, j] = buf[c]
    return out


def _channel_moments_loop(amps, weights):
    n_ch, n_pts = amps.shape
    res = np.zeros((n_ch, 2))
    for c in range(n_ch):
        s0 = 0.0
        s1 = 0.0
        for j in range(n_pts):
            a = amps[c, j]
            d = a.real * a.real + a.imag * a.imag
            s0 += d
            s1 += d * weights[j]
        res[c, 0] = s0
        res[c, 1] = s1
    return res


def _sliding_range_loop(values, half_width):
    n = values.shape[0]
    res = np.empty(n)
    for k in range(n):
        lo = max(0, k - half_width)
        hi = min(n, k + half_width + 1)
        vmax = values[lo]
        vmin = values[lo]
        for i in range(lo + 1, hi):
            v = values[i]
            if v > vmax:
                vmax = v
            if v < vmin:
                vmin = v
        res[k] = vmax - vmin
    return res


IMPLEMENTATIONS = {
    "numpy": {
        "apply_pointwise": _apply_pointwise_numpy,
        "channel_moments": _channel_moments_numpy,
        "sliding_range": _sliding_range_numpy,
    }
}

if njit is not None:
    IMPLEMENTATIONS["numba"] = {
        "apply_pointwise": njit(cache=True)(_apply_pointwise_loop),
        "channel_moments": njit(cache=True)(_channel_moments_loop),
        "sliding_range": njit(cache=True)(_sliding_range_loop),
    }

BACKEND = "numba" if USE_NUMBA else "numpy"
_active = IMPLEMENTATIONS[BACKEND]

apply_pointwise = _active["apply_pointwise"]
channel_moments = _active["channel_moments"]
sliding_range = _active["sliding_range"]
