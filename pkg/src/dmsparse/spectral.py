"""DFT pair, spectral hard thresholding, threshold schedules and the
retained-sample smoothing block used ahead of IMATDM."""
from dataclasses import dataclass

import numpy as np

from .codec import MaskedSignal, SamplingMask
from .core import as_frame


def dft(frame):
    """Unnormalized forward DFT, ``X(m) = sum_n x(n) exp(-2j pi n m / N)``."""
    return np.fft.fft(as_frame(frame))


def idft(spec, real=True):
    """Inverse of :func:`dft` (includes the 1/N factor).

    With ``real=True`` the imaginary residue is dropped; the caller is
    responsible for passing a Hermitian spectrum.
    """
    x = np.fft.ifft(np.asarray(spec, dtype=complex))
    return x.real.copy() if real else x


def hard_threshold(frame, th):
    """Zero every DFT coefficient with ``|X(m)| < th`` and transform back.

    Works on the half spectrum of the real input so conjugate pairs are
    always kept or dropped together.
    """
    x = as_frame(frame)
    if th < 0:
        raise ValueError(f"threshold must be non-negative, got {th}")
    X = np.fft.rfft(x)
    X[np.abs(X) < th] = 0
    return np.fft.irfft(X, n=x.size)


@dataclass(frozen=True)
class ThresholdSchedule:
    """Exponentially decaying threshold ``beta * exp(alpha * k)``."""

    beta: float
    alpha: float = -0.1

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.alpha < 0:
            raise ValueError(f"alpha must be negative for a decaying threshold, got {self.alpha}")

    def at(self, k):
        if k < 0:
            raise ValueError(f"iteration index must be >= 0, got {k}")
        return self.beta * np.exp(self.alpha * k)

    def values(self, n):
        return self.beta * np.exp(self.alpha * np.arange(n))


def threshold_at(sched, k):
    return sched.at(k)


def _moving_mean(v, l):
    # mean of l consecutive values starting at each position
    return np.lib.stride_tricks.sliding_window_view(v, l).mean(axis=1)


def _smooth_run(v, l):
    m = v.size
    l = min(l, m - m % 2)
    means = _moving_mean(v, l)  # means[j] covers v[j : j + l]
    i = np.arange(m)
    left = np.clip(i - l // 2, 0, m - l)
    right = np.clip(i - l // 2 + 1, 0, m - l)
    return 0.5 * (means[left] + means[right])


def smooth_retained(masked, l=2, max_gap=1):
    """Average each retained sample with its neighbours in retained order.

    Missing samples are skipped rather than averaged in as zeros. For even
    `l` a length-`l` window cannot be centred on a sample, so the result is
    the mean of the two length-`l` windows that straddle it (a length
    ``l + 1`` window with half-weight ends). Alternating ``+-e`` errors
    cancel exactly under either window. Near the ends of a run the windows
    are shifted inwards so they keep their length.

    Averaging only happens within runs of retained samples whose index gap
    is at most `max_gap`; the default keeps smoothing inside contiguous
    granular stretches. ``max_gap=None`` treats all retained samples as one
    run. Runs shorter than two samples are left alone, and windows are cut
    to the largest even length that fits a short run.
    """
    if l < 2 or l % 2:
        raise ValueError(f"smoothing length must be an even integer >= 2, got {l}")
    d = masked.mask.d
    idx = np.flatnonzero(d)
    if idx.size < l:
        raise ValueError(f"need at least {l} retained samples to smooth, got {idx.size}")
    if max_gap is None:
        runs = [idx]
    else:
        runs = np.split(idx, np.flatnonzero(np.diff(idx) > max_gap) + 1)
    out = masked.values.copy()
    for run in runs:
        if run.size >= 2:
            out[run] = _smooth_run(masked.values[run], l)
    return MaskedSignal(out, SamplingMask(d.copy()))
