"""Monte Carlo checks of the statistical model behind IMAT.

Under the iid missing-sampling model ``y_d(n) = d(n) (x(n) + q(n))``:

* each DFT bin of ``y_d`` has mean ``p X(m)`` and variance
  ``(p - p^2) E_x + p N delta^2 / 4`` (the same for every bin);
* the mean error of a bin that is above threshold shrinks geometrically by
  ``1 - lam p`` per IMAT iteration;
* the spectral variance after an update is
  ``lam^2 (p - p^2) (E_r + E_s) + lam^2 p N delta^2 / 4`` where ``E_r`` is
  the energy still missing from the support and ``E_s`` the energy picked
  off the support.

All trials are drawn from per-chunk generators spawned from one master seed
and reduced in chunk order, so results are bit-reproducible.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from .core import as_frame, energy

REPORT_COLUMNS = ("quantity", "predicted", "empirical", "rel_error", "trials", "seed")
_CHUNK = 10_000


def predicted_variance(p, eps_x, n, delta):
    return (p - p * p) * eps_x + p * n * delta ** 2 / 4


def _chunk_rngs(trials, seed, chunk=_CHUNK):
    sizes = [chunk] * (trials // chunk)
    if trials % chunk:
        sizes.append(trials % chunk)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    return [(size, np.random.default_rng(ss)) for size, ss in zip(sizes, children)]


def _draw_model(rng, x, p, delta, size):
    d = rng.random((size, x.size)) < p
    q = np.where(rng.random((size, x.size)) < 0.5, delta / 2, -delta / 2)
    return d, np.where(d, x + q, 0.0)


@dataclass
class SpectrumStats:
    mean: np.ndarray  # empirical mean of Y_d(m)
    variance: np.ndarray  # empirical E|Y_d(m) - p X(m)|^2 per bin
    predicted_mean: np.ndarray
    predicted_variance: float
    trials: int
    seed: int

    @property
    def mean_rel_error(self):
        ref = np.linalg.norm(self.predicted_mean)
        err = np.linalg.norm(self.mean - self.predicted_mean)
        return err / ref if ref > 0 else err

    @property
    def variance_rel_error(self):
        emp = float(np.mean(self.variance))
        if self.predicted_variance == 0:
            return abs(emp)
        return abs(emp - self.predicted_variance) / self.predicted_variance

    def rows(self):
        return [
            dict(quantity="spectrum_mean_norm", predicted=float(np.linalg.norm(self.predicted_mean)),
                 empirical=float(np.linalg.norm(self.mean)), rel_error=float(self.mean_rel_error),
                 trials=self.trials, seed=self.seed),
            dict(quantity="spectrum_variance", predicted=float(self.predicted_variance),
                 empirical=float(np.mean(self.variance)),
                 rel_error=float(self.variance_rel_error), trials=self.trials, seed=self.seed),
        ]


def validate_theorem1(frame, p, delta, trials=100_000, seed=0):
    """Empirical mean and variance of the DFT of iid-model draws of `frame`.

    The variance is ``E|Y_d(m) - p X(m)|^2`` per bin, measured around the
    predicted mean.
    """
    x = as_frame(frame)
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    X = np.fft.fft(x)
    target = p * X
    total = np.zeros(x.size, dtype=complex)
    sq = np.zeros(x.size)
    for size, rng in _chunk_rngs(trials, seed):
        _, y = _draw_model(rng, x, p, delta, size)
        Y = np.fft.fft(y, axis=1)
        total += Y.sum(axis=0)
        sq += (np.abs(Y - target) ** 2).sum(axis=0)
    return SpectrumStats(total / trials, sq / trials, target,
                         predicted_variance(p, energy(x), x.size, delta), trials, seed)


def monte_carlo_imat(frame, p, lam, delta, thresholds, trials, seed):
    """Run IMAT on `trials` iid-model draws with a given threshold per iteration.

    Returns the half spectra of every iterate, shape
    ``(len(thresholds) + 1, trials, N // 2 + 1)``; index 0 is ``x_0 = 0``.
    """
    x = as_frame(frame)
    n = x.size
    out = np.zeros((len(thresholds) + 1, trials, n // 2 + 1), dtype=complex)
    start = 0
    for size, rng in _chunk_rngs(trials, seed):
        d, y = _draw_model(rng, x, p, delta, size)
        xk = np.zeros((size, n))
        for k, th in enumerate(thresholds, start=1):
            Xk = np.fft.rfft(xk, axis=1)
            t = np.fft.irfft(np.where(np.abs(Xk) >= th, Xk, 0), n=n, axis=1)
            xk = lam * y + (1 - lam * d) * t
            out[k, start:start + size] = np.fft.rfft(xk, axis=1)
        start += size
    return out


@dataclass
class ConvergenceTrace:
    bin: int
    errors: np.ndarray  # e_k = X(m) - mean X_k(m), complex
    bias_sq: np.ndarray
    variance: np.ndarray
    mse: np.ndarray
    ratio: float  # fitted common ratio
    theory_ratio: float
    used_pairs: int
    truncated: bool
    trials: int
    seed: int

    def rows(self):
        rel = abs(self.ratio - self.theory_ratio) / max(abs(self.theory_ratio), 1e-12)
        return [dict(quantity="error_ratio", predicted=self.theory_ratio, empirical=self.ratio,
                     rel_error=float(rel), trials=self.trials, seed=self.seed)]


def single_bin_frame(n=256, bin=5, amplitude=1.0, phase=0.3):
    """Real cosine occupying one conjugate pair of DFT bins."""
    t = np.arange(n)
    return amplitude * np.cos(2 * np.pi * bin * t / n + phase)


def geometric_error_check(frame, lam, p, trials=100, seed=0, delta=0.0, iters=12,
                          threshold=None, bin=None):
    """Fit the per-iteration ratio of the mean error of one tracked bin.

    The threshold is held constant; by default it sits at half the smallest
    expected iterate magnitude ``min_k |1 - r^k| |X(m)|`` with
    ``r = 1 - lam p``, so the tracked bin stays picked from the first
    iteration on. Noise bins must stay below it too, which needs a long
    frame when ``|r|`` is close to one.
    Successive ratios are fitted by least squares over the iterations where
    the mean error is still clear of the Monte Carlo noise floor;
    ``truncated`` is set when fewer iterations than requested qualify, and
    ``ratio`` is NaN when none do.
    """
    x = as_frame(frame)
    if not 0 < lam < 2 / p:
        raise ValueError(f"lam={lam} outside (0, 2/p) for p={p}")
    X = np.fft.rfft(x)
    m = int(np.argmax(np.abs(X))) if bin is None else int(bin)
    if threshold is None:
        r = 1 - lam * p
        lowest = 1 - r if r >= 0 else 1 - r * r
        threshold = 0.5 * lowest * abs(X[m])
    spectra = monte_carlo_imat(x, p, lam, delta, [threshold] * iters, trials, seed)
    track = spectra[:, :, m]
    mean = track.mean(axis=1)
    errors = X[m] - mean
    variance = np.mean(np.abs(track - mean[:, None]) ** 2, axis=1)
    bias_sq = np.abs(errors) ** 2
    mse = np.mean(np.abs(track - X[m]) ** 2, axis=1)

    floor = 3 * np.sqrt(variance / trials)
    usable = np.abs(errors) > floor
    usable[0] = True  # e_0 = X(m) exactly
    num = 0.0
    den = 0.0
    pairs = 0
    for k in range(iters):
        if not (usable[k] and usable[k + 1]):
            break
        num += (np.conj(errors[k]) * errors[k + 1]).real
        den += abs(errors[k]) ** 2
        pairs += 1
    ratio = num / den if pairs else float("nan")
    return ConvergenceTrace(m, errors, bias_sq, variance, mse, float(ratio), 1 - lam * p,
                            pairs, pairs < iters, trials, seed)


@dataclass
class VarianceDecomposition:
    eps_residual: float
    eps_mistaken: float
    coding_term: float
    support: np.ndarray
    reconstructed: np.ndarray  # support part of T(x_k)
    mistaken: np.ndarray  # off-support part of T(x_k)
    residual: np.ndarray  # x - reconstructed
    p: float
    lam: float

    @property
    def sigma2(self):
        return self.lam ** 2 * (self.p - self.p ** 2) * (self.eps_residual + self.eps_mistaken) \
            + self.coding_term


def true_support(reference, rtol=1e-9):
    X = np.fft.fft(as_frame(reference, "reference"))
    mag = np.abs(X)
    if mag.max() == 0:
        raise ValueError("reference has no support (all-zero frame)")
    return np.flatnonzero(mag > rtol * mag.max())


def decompose_variance(reference, estimate, p, lam, delta, threshold=0.0, support=None):
    """Split ``T(x_k)`` into on-support and off-support parts and evaluate
    the three terms of the spectral variance after the next update."""
    x = as_frame(reference, "reference")
    xk = as_frame(estimate, "estimate")
    n = x.size
    supp = true_support(x) if support is None else np.asarray(support)
    Tk = np.fft.fft(xk)
    Tk[np.abs(Tk) < threshold] = 0
    on = np.zeros(n, dtype=bool)
    on[supp] = True
    recon = np.fft.ifft(np.where(on, Tk, 0)).real
    mistaken = np.fft.ifft(np.where(on, 0, Tk)).real
    residual = x - recon
    return VarianceDecomposition(energy(residual), energy(mistaken),
                                 lam ** 2 * p * n * delta ** 2 / 4, supp,
                                 recon, mistaken, residual, p, lam)


def predicted_sigma(p, lam, delta, n, eps_residual, eps_mistaken=0.0):
    eps = np.asarray(eps_residual, dtype=float) + eps_mistaken
    return np.sqrt(lam ** 2 * (p - p * p) * eps + lam ** 2 * p * n * delta ** 2 / 4)


@dataclass
class GuardReport:
    ok: bool
    first_violation: int = None
    margins: list = field(default_factory=list)


def guard_check(thresholds, sigmas, gamma):
    """Check ``Th(k) >= gamma * sigma_k`` for every iteration.

    `thresholds` may be a sequence or a ThresholdSchedule (evaluated at
    ``k = 0 .. len(sigmas) - 1``).
    """
    sigmas = np.asarray(sigmas, dtype=float)
    if hasattr(thresholds, "values"):
        th = thresholds.values(sigmas.size)
    else:
        th = np.asarray(thresholds, dtype=float)
    if th.size != sigmas.size:
        raise ValueError("thresholds and sigmas differ in length")
    margins = th - gamma * sigmas
    bad = np.flatnonzero(margins < 0)
    if bad.size:
        return GuardReport(False, int(bad[0]), margins.tolist())
    return GuardReport(True, None, margins.tolist())


def write_validation_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{r[k]:.6g}" if isinstance(r[k], float) else r[k])
                        for k in REPORT_COLUMNS})


def format_validation(rows):
    lines = ["{:<22} {:>12} {:>12} {:>10} {:>8} {:>6}".format(*REPORT_COLUMNS)]
    for r in rows:
        lines.append("{quantity:<22} {predicted:>12.6g} {empirical:>12.6g} "
                     "{rel_error:>10.4g} {trials:>8d} {seed:>6}".format(**r))
    return "\n".join(lines)
