"""Delta modulation (DM) and adaptive DM codecs, and the missing-sampling view.

The modulator is the usual one-bit recursion::

    b(n) = sign(x(n) - y(n-1)),   y(n) = y(n-1) + step(n) * b(n),   y(-1) = 0

with ``sign(0) = +1``. Granular (oscillating) samples are detected from sign
alternations of ``b`` and kept as a sampling mask; the remaining samples are
treated as missing.
"""
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import as_frame

MAGIC = b"DMBS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBBId")


@dataclass(frozen=True)
class AdmParams:
    """One-bit-memory step adaptation: multiply by `growth` on repeated signs,
    divide on alternation, clamp to ``[delta_min, delta_max]``."""

    delta0: float
    growth: float = 1.5
    delta_min: float = None
    delta_max: float = None

    def __post_init__(self):
        if self.delta_min is None:
            object.__setattr__(self, "delta_min", self.delta0 / 16)
        if self.delta_max is None:
            object.__setattr__(self, "delta_max", self.delta0 * 16)
        if not self.growth > 1:
            raise ValueError(f"growth must be > 1, got {self.growth}")
        if not 0 < self.delta_min <= self.delta0 <= self.delta_max:
            raise ValueError(
                "need 0 < delta_min <= delta0 <= delta_max, got "
                f"{self.delta_min}, {self.delta0}, {self.delta_max}")


@dataclass
class Bitstream:
    symbols: np.ndarray  # int8, values in {-1, +1}
    delta: float  # step size (initial step for ADM)
    adaptive: bool = False
    adm: AdmParams = None

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols, dtype=np.int8)
        if self.adaptive and self.adm is None:
            self.adm = AdmParams(self.delta)

    def __len__(self):
        return self.symbols.size


@dataclass
class Staircase:
    values: np.ndarray
    delta_trace: np.ndarray


@dataclass
class SamplingMask:
    d: np.ndarray  # bool

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=bool)

    @property
    def indices(self):
        return np.flatnonzero(self.d)

    @property
    def rate(self):
        return float(np.count_nonzero(self.d)) / self.d.size

    def __len__(self):
        return self.d.size


@dataclass
class MaskedSignal:
    values: np.ndarray
    mask: SamplingMask

    @property
    def retained(self):
        return self.values[self.mask.d]


@dataclass
class IidModelSample(MaskedSignal):
    q: np.ndarray = field(default=None)


def _check_delta(delta):
    if not (np.isfinite(delta) and delta > 0):
        raise ValueError(f"step size must be positive and finite, got {delta}")


def dm_encode(frame, delta):
    """Encode `frame` with a fixed-step delta modulator.

    Returns the bitstream and the modulator's internal staircase.
    """
    x = as_frame(frame)
    _check_delta(delta)
    bits = np.empty(x.size, dtype=np.int8)
    y = np.empty(x.size)
    acc = 0.0
    for n, xn in enumerate(x):
        b = 1 if xn - acc >= 0 else -1
        acc = acc + delta * b
        bits[n] = b
        y[n] = acc
    return Bitstream(bits, float(delta)), Staircase(y, np.full(x.size, float(delta)))


def _adm_steps(bits, params):
    steps = np.empty(bits.size)
    step = params.delta0
    for n in range(bits.size):
        if n > 0:
            if bits[n] == bits[n - 1]:
                step = min(step * params.growth, params.delta_max)
            else:
                step = max(step / params.growth, params.delta_min)
        steps[n] = step
    return steps


def adm_encode(frame, params):
    """Adaptive DM: the step grows by ``params.growth`` while the sign repeats
    and shrinks by the same factor on every alternation."""
    x = as_frame(frame)
    if not isinstance(params, AdmParams):
        params = AdmParams(float(params))
    bits = np.empty(x.size, dtype=np.int8)
    y = np.empty(x.size)
    steps = np.empty(x.size)
    acc = 0.0
    step = params.delta0
    prev = 0
    for n, xn in enumerate(x):
        b = 1 if xn - acc >= 0 else -1
        if n > 0:
            if b == prev:
                step = min(step * params.growth, params.delta_max)
            else:
                step = max(step / params.growth, params.delta_min)
        acc = acc + step * b
        bits[n] = b
        y[n] = acc
        steps[n] = step
        prev = b
    stream = Bitstream(bits, params.delta0, adaptive=True, adm=params)
    return stream, Staircase(y, steps)


def _check_symbols(bits):
    s = np.asarray(bits.symbols)
    if s.ndim != 1:
        raise ValueError("bitstream symbols must be 1-D")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError("bitstream symbols must be +1 or -1")
    return s


def dm_decode(bits):
    """Rebuild the staircase by accumulating the signed steps.

    Handles both fixed-step and adaptive streams; the result matches the
    encoder's staircase bit for bit.
    """
    s = _check_symbols(bits)
    if bits.adaptive:
        steps = _adm_steps(s, bits.adm)
    else:
        _check_delta(bits.delta)
        steps = np.full(s.size, float(bits.delta))
    y = np.empty(s.size)
    acc = 0.0
    for n in range(s.size):
        acc = acc + steps[n] * int(s[n])
        y[n] = acc
    return Staircase(y, steps)


adm_decode = dm_decode


def extract_mask(bits):
    """Sampling mask from sign alternations: ``d(n) = 1`` iff ``b(n) b(n+1) = -1``.

    The last sample has no successor and is never retained.
    """
    s = bits.symbols if isinstance(bits, Bitstream) else np.asarray(bits)
    if s.size < 2:
        raise ValueError("mask extraction needs at least two symbols")
    d = np.zeros(s.size, dtype=bool)
    d[:-1] = s[:-1].astype(np.int64) * s[1:] == -1
    return SamplingMask(d)


def masked_signal(stair, mask):
    values = stair.values if isinstance(stair, Staircase) else np.asarray(stair, dtype=float)
    d = mask.d if isinstance(mask, SamplingMask) else np.asarray(mask, dtype=bool)
    if values.shape != d.shape:
        raise ValueError(f"length mismatch: {values.size} vs {d.size}")
    return MaskedSignal(np.where(d, values, 0.0), SamplingMask(d))


def _check_rate(p):
    if not 0 <= p <= 1:
        raise ValueError(f"sampling rate must lie in [0, 1], got {p}")


def bernoulli_mask(n, p, seed):
    """iid Bernoulli(p) mask of length `n`, reproducible from `seed`."""
    _check_rate(p)
    rng = np.random.default_rng(seed)
    return SamplingMask(rng.random(n) < p)


def iid_model_sample(frame, p, delta, seed):
    """Draw ``y_d(n) = d(n) (x(n) + q(n))`` with ``d ~ Bernoulli(p)`` and
    ``q = +-delta/2`` equiprobable, all independent."""
    x = as_frame(frame)
    _check_rate(p)
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    rng = np.random.default_rng(seed)
    d = rng.random(x.size) < p
    q = np.where(rng.random(x.size) < 0.5, delta / 2, -delta / 2)
    return IidModelSample(np.where(d, x + q, 0.0), SamplingMask(d), q=q)


def write_bitstream(path, bits):
    """Write `bits` as ``DMBS`` header + MSB-first packed bits (1 means +1)."""
    s = _check_symbols(bits)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, int(bool(bits.adaptive)), s.size,
                          float(bits.delta))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.packbits(s > 0).tobytes())


def read_bitstream(path):
    """Inverse of :func:`write_bitstream`.

    Adaptive streams come back with default adaptation constants derived
    from the stored initial step.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated bitstream header")
    magic, version, adaptive, n, delta = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    payload = np.frombuffer(raw, dtype=np.uint8, offset=_HEADER.size)
    if payload.size != (n + 7) // 8:
        raise ValueError(f"{path}: expected {(n + 7) // 8} payload bytes, got {payload.size}")
    ones = np.unpackbits(payload, count=n).astype(bool)
    symbols = np.where(ones, 1, -1).astype(np.int8)
    return Bitstream(symbols, delta, adaptive=bool(adaptive))
