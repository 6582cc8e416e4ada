"""Shared small utilities: thread cap, FFT wrappers, formatting."""

import os

import numpy as np
import scipy.fft as _fft


def fft_workers() -> int:
    """Worker count for FFTs, capped by THINFLOW_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("THINFLOW_THREADS", "1")))
    except ValueError:
        return 1


def fft2(a):
    return _fft.fft2(a, workers=fft_workers())


def ifft2(a):
    return _fft.ifft2(a, workers=fft_workers())


def rfft2(a):
    return _fft.rfft2(a, workers=fft_workers())


def irfft2(a, shape):
    return _fft.irfft2(a, s=shape, workers=fft_workers())


def fmt_float(x: float) -> str:
    """17 significant digits so that text round-trips are exact."""
    return format(float(x), ".17g")


def smoothstep(t):
    """C-infinity ramp: 0 for t <= 0, 1 for t >= 1, monotone in between."""
    t = np.asarray(t, dtype=float)
    lo = t <= 0.0
    hi = t >= 1.0
    mid = ~(lo | hi)
    out = np.zeros_like(t)
    out[hi] = 1.0
    tm = t[mid]
    a = np.exp(-1.0 / tm)
    b = np.exp(-1.0 / (1.0 - tm))
    out[mid] = a / (a + b)
    if out.ndim == 0:
        return float(out)
    return out
