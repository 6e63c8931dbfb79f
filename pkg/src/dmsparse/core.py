"""Frames, energy and SNR metrics, and framing of long recordings.

Frames are plain 1-D float arrays throughout the package. The default
frame is 20 ms at 48 kHz, i.e. 960 samples.
"""
from dataclasses import dataclass
from functools import total_ordering

import numpy as np

SAMPLE_RATE = 48000
FRAME_LEN = 960
SNR_CAP_DB = 100.0


def as_frame(x, name="frame"):
    """Return `x` as a finite 1-D float64 array, raising ValueError otherwise."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite samples")
    return x


@total_ordering
@dataclass(frozen=True)
class SnrDb:
    """Signal-to-noise ratio in dB.

    ``capped`` is set when the error energy is zero (or the ratio exceeds the
    cap), in which case ``value`` equals the cap.
    """

    value: float
    capped: bool = False

    def __float__(self):
        return float(self.value)

    def __lt__(self, other):
        return float(self) < float(other)

    def __eq__(self, other):
        try:
            return float(self) == float(other)
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash(self.value)


def energy(frame):
    """Sum of squared samples."""
    x = as_frame(frame)
    return float(np.dot(x, x))


def snr_db(reference, estimate, cap=SNR_CAP_DB):
    """Reconstruction SNR ``10 log10(sum x^2 / sum (x_hat - x)^2)`` in dB.

    Parameters
    ----------
    reference : array_like
        Ground-truth frame; must have positive energy.
    estimate : array_like
        Reconstructed frame of the same length.
    cap : float
        Value reported when the error energy vanishes or the ratio exceeds it.

    Returns
    -------
    SnrDb
    """
    x = as_frame(reference, "reference")
    xh = as_frame(estimate, "estimate")
    if x.shape != xh.shape:
        raise ValueError(f"length mismatch: {x.size} vs {xh.size}")
    sig = float(np.dot(x, x))
    if sig <= 0.0:
        raise ValueError("reference frame has zero energy")
    err = xh - x
    noise = float(np.dot(err, err))
    if noise == 0.0:
        return SnrDb(cap, True)
    value = 10.0 * np.log10(sig / noise)
    if value >= cap:
        return SnrDb(cap, True)
    return SnrDb(float(value), False)


def success_rate(snrs, threshold):
    """Percentage of SNR values at or above `threshold` (dB)."""
    vals = np.array([float(s) for s in snrs])
    if vals.size == 0:
        raise ValueError("success_rate needs at least one SNR value")
    return 100.0 * np.count_nonzero(vals >= threshold) / vals.size


def frame_split(samples, frame_len=FRAME_LEN, hop=None):
    """Cut `samples` into fixed-length frames; a trailing partial window is dropped.

    ``hop`` defaults to ``frame_len`` (non-overlapping frames).
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("frame_split needs a non-empty 1-D input")
    hop = frame_len if hop is None else hop
    if frame_len <= 0 or hop <= 0:
        raise ValueError("frame_len and hop must be positive")
    starts = range(0, x.size - frame_len + 1, hop)
    return [x[s:s + frame_len].copy() for s in starts]
