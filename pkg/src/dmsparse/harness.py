"""Corpus ingestion, synthetic sparse frames, and the experiment sweeps.

A sweep DM-codes every frame at each step size, extracts the sampling mask,
reconstructs with each requested method and aggregates mean SNR and
success rate into a :class:`ReportTable`.
"""
import csv
import hashlib
import io
import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.io import wavfile

from . import codec, recon
from .core import FRAME_LEN, SAMPLE_RATE, as_frame, frame_split, snr_db, success_rate
from .spectral import smooth_retained

METHODS = ("imatdm", "imat", "omp", "lasso", "lowpass")
REPORT_FIELDS = ("method", "delta", "p", "mean_snr_db", "success_rate_pct", "frames", "failures")


# ---------------------------------------------------------------------------
# WAV input / output
# ---------------------------------------------------------------------------


def load_wav(path):
    """Read a PCM16 or float32 WAV file as floats in [-1, 1].

    16-bit samples are divided by 32768. Multi-channel files are downmixed
    by averaging. Returns ``(samples, sample_rate)``.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, EOFError, wavfile.WavFileWarning, Exception) as exc:
        raise ValueError(f"{path}: unreadable or truncated WAV ({exc})") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported sample format {data.dtype} (need PCM16 or float32)")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return samples, int(rate)


def write_wav(path, samples, sample_rate=SAMPLE_RATE, fmt="pcm16"):
    x = np.asarray(samples, dtype=float)
    if fmt == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    elif fmt == "float32":
        data = x.astype(np.float32)
    else:
        raise ValueError(f"unknown WAV format {fmt!r}")
    wavfile.write(path, int(sample_rate), data)


def wav_paths(inputs):
    """Expand files and directories (non-recursive ``*.wav`` scan), sorted."""
    out = []
    for item in inputs:
        if os.path.isdir(item):
            out.extend(sorted(os.path.join(item, f) for f in os.listdir(item)
                              if f.lower().endswith(".wav")))
        elif os.path.exists(item):
            out.append(item)
        else:
            raise FileNotFoundError(item)
    if not out:
        raise ValueError(f"no WAV files found in {', '.join(map(str, inputs))}")
    return out


def wav_corpus(inputs, frame_len=FRAME_LEN, max_frames=None, min_rms=1e-4):
    """Frames of every WAV in `inputs`, skipping near-silent ones.

    Returns ``(frames, sample_rate)``; all files must share one rate.
    """
    frames, rate = [], None
    for path in wav_paths(inputs):
        x, fs = load_wav(path)
        if rate is None:
            rate = fs
        elif fs != rate:
            raise ValueError(f"{path}: sample rate {fs} differs from {rate}")
        if x.size < frame_len:
            continue
        for f in frame_split(x, frame_len):
            if np.sqrt(np.mean(f ** 2)) >= min_rms:
                frames.append(f)
    if max_frames is not None:
        frames = frames[:max_frames]
    if not frames:
        raise ValueError("corpus has no non-silent frames")
    return frames, rate


# ---------------------------------------------------------------------------
# Synthetic frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a random frame made of `k` real tones.

    ``band_split`` of the tones are placed in ``high_band_hz`` (above the
    voice cutoff), the rest in ``low_band_hz``. With ``on_grid`` the tones
    sit on DFT bins so the spectrum is exactly ``2k``-sparse; otherwise the
    frequencies are continuous and the spectrum is only compressible, as
    for real voice frames. ``energy_split`` rescales the two bands so that
    fraction of the energy lies in the high band; ``rms`` rescales the
    whole frame.
    """

    n: int = FRAME_LEN
    k: int = 8
    amp_range: tuple = (0.5, 1.0)
    band_split: float = 0.5
    seed: int = 0
    sample_rate: int = SAMPLE_RATE
    low_band_hz: tuple = (50.0, 3250.0)
    high_band_hz: tuple = (3350.0, 8000.0)
    on_grid: bool = True
    energy_split: float = None
    rms: float = None
    bins: tuple = None

    def validate(self):
        if self.n <= 0:
            raise ValueError("frame length must be positive")
        if not 0 <= self.k < self.n / 2:
            raise ValueError(f"need 0 <= k < N/2, got k={self.k}, N={self.n}")
        lo, hi = self.amp_range
        if not 0 < lo <= hi:
            raise ValueError(f"amplitudes must be positive, got range {self.amp_range}")
        if not 0 <= self.band_split <= 1:
            raise ValueError(f"band_split must lie in [0, 1], got {self.band_split}")
        if self.energy_split is not None and not 0 < self.energy_split < 1:
            raise ValueError(f"energy_split must lie in (0, 1), got {self.energy_split}")


@dataclass
class SyntheticFrame:
    samples: np.ndarray
    spectrum: np.ndarray  # full DFT of samples
    freqs_hz: np.ndarray
    high: np.ndarray  # which tones lie in the high band


def _band_bins(band_hz, n, fs):
    lo = max(1, int(np.ceil(band_hz[0] * n / fs)))
    hi = min((n - 1) // 2, int(np.floor(band_hz[1] * n / fs)))
    return np.arange(lo, hi + 1)


def synth_sparse_frame(spec):
    """Generate one frame from `spec`; the true spectrum is kept for oracles."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, fs = spec.n, spec.sample_rate
    if spec.bins is not None:
        bins = np.asarray(spec.bins, dtype=int)
        if bins.size != spec.k or np.any((bins <= 0) | (bins >= n / 2)):
            raise ValueError("explicit bins must be k distinct values in (0, N/2)")
        freqs = bins * fs / n
        high = freqs > spec.low_band_hz[1]
    else:
        kh = int(round(spec.k * spec.band_split))
        kl = spec.k - kh
        if spec.on_grid:
            lo_bins = _band_bins(spec.low_band_hz, n, fs)
            hi_bins = _band_bins(spec.high_band_hz, n, fs)
            if kl > lo_bins.size or kh > hi_bins.size:
                raise ValueError("band too narrow for the requested number of tones")
            bins = np.concatenate([rng.choice(lo_bins, kl, replace=False),
                                   rng.choice(hi_bins, kh, replace=False)])
            freqs = bins * fs / n
        else:
            freqs = np.concatenate([rng.uniform(*spec.low_band_hz, kl),
                                    rng.uniform(*spec.high_band_hz, kh)])
        high = np.arange(spec.k) >= kl
    amps = rng.uniform(*spec.amp_range, spec.k)
    phases = rng.uniform(0, 2 * np.pi, spec.k)
    t = np.arange(n) / fs
    tones = amps[:, None] * np.cos(2 * np.pi * freqs[:, None] * t + phases[:, None])
    if spec.k == 0:
        x = np.zeros(n)
    elif spec.energy_split is not None and high.any() and (~high).any():
        lo_part, hi_part = tones[~high].sum(axis=0), tones[high].sum(axis=0)
        x = (np.sqrt(1 - spec.energy_split) * lo_part / np.linalg.norm(lo_part)
             + np.sqrt(spec.energy_split) * hi_part / np.linalg.norm(hi_part))
        x *= np.linalg.norm(tones.sum(axis=0)) / np.linalg.norm(x)
    else:
        x = tones.sum(axis=0)
    if spec.rms is not None and spec.k:
        x *= spec.rms / np.sqrt(np.mean(x ** 2))
    X = np.fft.fft(x)
    if spec.on_grid or spec.bins is not None:
        # exact zeros off the support, so the oracle spectrum is exactly sparse
        keep = np.zeros(n, dtype=bool)
        b = np.rint(freqs * n / fs).astype(int)
        keep[b] = keep[(n - b) % n] = True
        X[~keep] = 0
        x = np.fft.ifft(X).real
    return SyntheticFrame(x, X, freqs, high)


def mixed_band_corpus(frames=200, seed=0, n=FRAME_LEN, on_grid=False, rms=0.0316,
                      k=8, high_energy=0.5, low_band_hz=(50.0, 1000.0),
                      high_band_hz=(3350.0, 4500.0)):
    """Voice-like synthetic corpus: half the tones near the voice fundamentals
    and first formant, half just above 3.3 kHz carrying `high_energy` of the
    energy, at about -30 dBFS rms. Off-grid by default."""
    seeds = np.random.SeedSequence(seed).generate_state(frames)
    out = []
    for s in seeds:
        spec = SyntheticSpec(n=n, k=k, band_split=0.5, seed=int(s), on_grid=on_grid,
                             energy_split=high_energy, rms=rms,
                             low_band_hz=low_band_hz, high_band_hz=high_band_hz)
        out.append(synth_sparse_frame(spec).samples)
    return out


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    """Reconstruction and reporting settings shared by all sweeps.

    OMP and LASSO are tuned to the coding-noise level implied by the step
    size: OMP stops once the residual drops to ``omp_noise_scale *
    sqrt(M) * delta / 2`` and LASSO uses the universal threshold for
    ``+-delta/2`` noise scaled by ``lasso_noise_scale``. IMAT uses the
    threshold guard with the same noise model when `guard` is set.
    """

    threshold_db: float = 15.0
    lam: float = 1.0
    alpha: float = -0.1
    beta_scale: float = 0.9
    max_iters: int = 100
    guard: float = 2.0
    smooth_len: int = 2
    smooth_max_gap: int = 1
    omp_max_atoms: int = 64
    omp_noise_scale: float = 1.0
    lasso_noise_scale: float = 1.0
    lasso_max_iters: int = 500
    lowpass_cutoff_hz: float = 3300.0
    lowpass_taps: int = 255
    sample_rate: int = SAMPLE_RATE
    noiseless: bool = False
    mask_mode: str = "dm"  # or "bernoulli": iid mask at the DM rate
    seed: int = 0

    def __post_init__(self):
        if self.mask_mode not in ("dm", "bernoulli"):
            raise ValueError(f"mask_mode must be 'dm' or 'bernoulli', got {self.mask_mode!r}")
        if self.smooth_len < 2 or self.smooth_len % 2:
            raise ValueError("smooth_len must be an even integer >= 2")

    def imat_params(self, delta):
        return recon.ImatParams(lam=self.lam, alpha=self.alpha, beta_scale=self.beta_scale,
                                max_iters=self.max_iters, guard=self.guard if delta > 0 else None,
                                delta=delta)

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:10]


@dataclass
class ReportRow:
    method: str
    delta: float
    p: float
    mean_snr_db: float
    success_rate_pct: float
    frames: int
    failures: int = 0


@dataclass
class ReportTable:
    rows: list = field(default_factory=list)
    snrs: dict = field(default_factory=dict)  # (method, delta) -> per-frame SNRs

    def row(self, method, delta):
        for r in self.rows:
            if r.method == method and r.delta == delta:
                return r
        raise KeyError((method, delta))


def reconstruct(method, x, stair, mask, noise_step, config):
    """Reconstruct one frame with `method`.

    `noise_step` is the step size used to model the coding error (0 in
    noiseless mode).
    """
    if config.noiseless:
        masked = codec.masked_signal(x, mask)
    else:
        masked = codec.masked_signal(stair, mask)
    retained = int(np.count_nonzero(mask.d))
    noise = noise_step / 2
    if method == "lowpass":
        src = x if config.noiseless else stair.values
        return recon.lowpass_reconstruct(src, config.lowpass_cutoff_hz, config.sample_rate,
                                         config.lowpass_taps)
    if method == "imat":
        return recon.imat(masked, config.imat_params(noise_step))[0]
    if method == "imatdm":
        smoothed = smooth_retained(masked, config.smooth_len, config.smooth_max_gap)
        return recon.imat(smoothed, config.imat_params(noise_step))[0]
    if method == "omp":
        atoms = min(config.omp_max_atoms, retained // 2)
        tol = config.omp_noise_scale * np.sqrt(retained) * noise
        return recon.omp(masked, atoms, residual_tol=max(tol, 1e-9))
    if method == "lasso":
        n = x.size
        if noise > 0:
            reg = config.lasso_noise_scale * 2 * noise * np.sqrt(2 * retained * np.log(n)) / n
        else:
            reg = 1e-3 * recon.lasso_reg_max(masked)
        if reg <= 0:
            return np.zeros(n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", recon.ConvergenceWarning)
            return recon.lasso(masked, reg, max_iters=config.lasso_max_iters)
    raise ValueError(f"unknown method {method!r}")


def mean_mask_rate(frames, delta):
    return float(np.mean([codec.extract_mask(codec.dm_encode(x, delta)[0]).rate for x in frames]))


def calibrate_delta(frames, target_p, lo=1e-5, hi=1.0, tol=1e-3, max_steps=40):
    """Step size whose mean DM mask rate over `frames` is `target_p`.

    Bisection on ``log(delta)``; the rate grows with the step because a
    larger step leaves the modulator in slope overload less often.
    """
    if not 0 < target_p < 1:
        raise ValueError(f"target rate must lie in (0, 1), got {target_p}")
    r_lo, r_hi = mean_mask_rate(frames, lo), mean_mask_rate(frames, hi)
    if not r_lo <= target_p <= r_hi:
        raise ValueError(f"rate {target_p} not bracketed by [{r_lo:.3f}, {r_hi:.3f}]")
    for _ in range(max_steps):
        mid = np.sqrt(lo * hi)
        r = mean_mask_rate(frames, mid)
        if abs(r - target_p) <= tol:
            return float(mid)
        if r < target_p:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


def reconstruct_stream(bits, method, config=None, frame_len=FRAME_LEN):
    """Decode a whole bitstream and reconstruct it frame by frame.

    A trailing partial frame is reconstructed at its own length.
    """
    config = config or SweepConfig()
    stair = codec.dm_decode(bits)
    mask = codec.extract_mask(bits)
    out = np.empty(stair.values.size)
    for start in range(0, out.size, frame_len):
        sl = slice(start, start + frame_len)
        seg = codec.Staircase(stair.values[sl], stair.delta_trace[sl])
        m = codec.SamplingMask(mask.d[sl])
        if bits.adaptive:
            steps = seg.delta_trace[m.d]
            noise_step = float(np.sqrt(np.mean(steps ** 2))) if steps.size else bits.delta
        else:
            noise_step = bits.delta
        if method == "lowpass" or m.d.sum() >= 2:
            out[sl] = reconstruct(method, seg.values, seg, m, noise_step, config)
        else:
            out[sl] = seg.values  # nothing retained: fall back to the staircase
    return out


def _frame_job(args):
    idx, x, deltas, methods, config, adm = args
    out = []
    for delta in deltas:
        if adm is not None:
            bits, stair = codec.adm_encode(x, adm)
        else:
            bits, stair = codec.dm_encode(x, delta)
        mask = codec.extract_mask(bits)
        if config.mask_mode == "bernoulli":
            mask = codec.bernoulli_mask(x.size, mask.rate, (config.seed, idx))
        if adm is not None:
            steps = stair.delta_trace[mask.d]
            noise_step = float(np.sqrt(np.mean(steps ** 2))) if steps.size else adm.delta0
        else:
            noise_step = delta
        if config.noiseless:
            noise_step = 0.0
        for method in methods:
            try:
                est = reconstruct(method, x, stair, mask, noise_step, config)
                snr, failed = float(snr_db(x, est)), False
            except (ValueError, np.linalg.LinAlgError):
                snr, failed = 0.0, True
            out.append((delta, method, mask.rate, snr, failed))
    return out


def _run(frames, deltas, methods, config, adm=None, jobs=1):
    frames = [as_frame(f) for f in frames]
    if not frames:
        raise ValueError("need at least one frame")
    if not deltas:
        raise ValueError("need at least one step size")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    tasks = [(i, x, list(deltas), list(methods), config, adm) for i, x in enumerate(frames)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_frame_job, tasks))
    else:
        results = [_frame_job(t) for t in tasks]

    table = ReportTable()
    for delta in deltas:
        for method in methods:
            hits = [r for frame_res in results for r in frame_res
                    if r[0] == delta and r[1] == method]
            snrs = [r[3] for r in hits]
            table.snrs[(method, delta)] = snrs
            table.rows.append(ReportRow(
                method=method, delta=float(delta), p=float(np.mean([r[2] for r in hits])),
                mean_snr_db=float(np.mean(snrs)),
                success_rate_pct=float(success_rate(snrs, config.threshold_db)),
                frames=len(hits), failures=sum(r[4] for r in hits)))
    return table


def delta_sweep(frames, deltas, methods=METHODS, config=None, jobs=1):
    """DM-code every frame at each step size in `deltas` and score each method."""
    return _run(frames, deltas, methods, config or SweepConfig(), jobs=jobs)


def adm_benchmark(frames, adm_params, methods=METHODS, config=None, jobs=1):
    """Same as :func:`delta_sweep` for adaptive DM; success threshold 20 dB by default.

    The coding-noise level used by the guard and the noise-aware baselines
    is the rms step size over the retained samples of each frame.
    """
    if not isinstance(adm_params, codec.AdmParams):
        adm_params = codec.AdmParams(float(adm_params))
    config = config or SweepConfig(threshold_db=20.0)
    return _run(frames, [adm_params.delta0], methods, config, adm=adm_params, jobs=jobs)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _fmt(v):
    return f"{v:.4f}"


def report_records(table):
    recs = []
    for r in table.rows:
        recs.append({"method": r.method, "delta": float(_fmt(r.delta)), "p": float(_fmt(r.p)),
                     "mean_snr_db": float(_fmt(r.mean_snr_db)),
                     "success_rate_pct": float(_fmt(r.success_rate_pct)),
                     "frames": r.frames, "failures": r.failures})
    return recs


def report_text(table, fmt="csv"):
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_FIELDS)
        for r in table.rows:
            w.writerow([r.method, _fmt(r.delta), _fmt(r.p), _fmt(r.mean_snr_db),
                        _fmt(r.success_rate_pct), r.frames, r.failures])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps(report_records(table), indent=2) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(table, fmt, path):
    """Write `table` as CSV or JSON (long format, 4 decimals) to `path`."""
    text = report_text(table, fmt)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def report_path(path, stem, config, fmt):
    """Resolve an output path; directories get ``<stem>-<config hash>.<fmt>``."""
    if os.path.isdir(path):
        return os.path.join(path, f"{stem}-{config.digest()}.{fmt}")
    return path
