"""Reconstruction of a frame from its retained (granular) samples.

IMAT alternates between re-imposing the retained samples and hard
thresholding the spectrum with an exponentially decaying threshold::

    x_{k+1}(n) = lam * y_d(n) + (1 - lam * d(n)) * T_k(x_k)(n),   x_0 = 0

IMATDM runs the same iteration on retained samples that were first smoothed
to cancel the alternating DM coding error. The lowpass, OMP and LASSO
reconstructors are the baselines they are compared against.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import firwin

from .codec import MaskedSignal, Staircase
from .core import SAMPLE_RATE, as_frame, snr_db
from .spectral import smooth_retained


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ImatParams:
    """IMAT settings.

    ``beta=None`` derives the initial threshold per frame as
    ``beta_scale * max|X_1(m)|`` from the first estimate ``x_1 = lam * y_d``.
    ``guard`` (gamma > 1) stops the iteration once the threshold falls below
    ``gamma`` times the coding-error spectral deviation
    ``sqrt(lam^2 p N delta^2 / 4)``; it needs the coding step ``delta``.
    """

    lam: float = 1.0
    alpha: float = -0.1
    beta: float = None
    beta_scale: float = 0.9
    max_iters: int = 100
    guard: float = None
    delta: float = 0.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.alpha < 0:
            raise ValueError(f"alpha must be negative, got {self.alpha}")
        if self.beta is not None and not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.guard is not None and not self.guard > 1:
            raise ValueError(f"guard multiplier must exceed 1, got {self.guard}")

    def check_rate(self, p):
        if p <= 0:
            raise ValueError("sampling mask is empty")
        if not 0 < self.lam < 2 / p:
            raise ValueError(
                f"relaxation lam={self.lam} outside (0, 2/p) = (0, {2 / p:.4g}) for mask "
                f"rate p={p:.4g}; the iteration is biased or diverges in mean there")


@dataclass
class ReconDiagnostics:
    thresholds: list = field(default_factory=list)
    snr_db: list = field(default_factory=list)
    support_sizes: list = field(default_factory=list)
    iterations: int = 0
    stopped_by_guard: bool = False


def coding_sigma(p, n, delta, lam=1.0):
    """Spectral deviation contributed by +-delta/2 coding errors on a mask of rate p."""
    return float(np.sqrt(lam ** 2 * p * n * delta ** 2 / 4))


def imat_step(x, masked, lam, th):
    """One IMAT update; returns ``(x_next, support_size)``."""
    X = np.fft.rfft(x)
    keep = np.abs(X) >= th
    t = np.fft.irfft(np.where(keep, X, 0), n=x.size)
    d = masked.mask.d
    x_next = lam * masked.values + (1 - lam * d) * t
    return x_next, _full_support(keep, x.size)


def _full_support(keep_half, n):
    # count bins of the full spectrum from half-spectrum flags
    k = 2 * np.count_nonzero(keep_half)
    k -= int(keep_half[0])
    if n % 2 == 0:
        k -= int(keep_half[-1])
    return k


def imat(masked, params=None, reference=None):
    """Reconstruct a frame from `masked` with the IMAT iteration.

    Parameters
    ----------
    masked : MaskedSignal
    params : ImatParams, optional
    reference : array_like, optional
        Ground truth; when given, per-iteration SNR is recorded.

    Returns
    -------
    x : ndarray
    diag : ReconDiagnostics
    """
    params = params or ImatParams()
    d = masked.mask.d
    n = d.size
    p = masked.mask.rate
    params.check_rate(p)
    lam = params.lam
    diag = ReconDiagnostics()
    ref = None if reference is None else as_frame(reference, "reference")

    def record(x, th, supp):
        diag.thresholds.append(float(th))
        diag.support_sizes.append(supp)
        if ref is not None:
            diag.snr_db.append(float(snr_db(ref, x)))

    # k = 0: T(x_0) = 0 whatever the threshold
    x = lam * masked.values
    beta = params.beta
    if beta is None:
        beta = params.beta_scale * float(np.max(np.abs(np.fft.rfft(x))))
    if beta <= 0:
        record(x, 0.0, 0)
        diag.iterations = 1
        return x, diag
    record(x, beta, 0)
    floor = 0.0
    if params.guard is not None:
        floor = params.guard * coding_sigma(p, n, params.delta, lam)
    for k in range(1, params.max_iters):
        th = beta * np.exp(params.alpha * k)
        if th < floor:
            diag.stopped_by_guard = True
            break
        x, supp = imat_step(x, masked, lam, th)
        record(x, th, supp)
    diag.iterations = len(diag.thresholds)
    return x, diag


def imatdm(masked, l=2, params=None, reference=None):
    """IMAT on retained samples smoothed over `l` neighbours first."""
    return imat(smooth_retained(masked, l), params, reference)


def lowpass_reconstruct(stair, cutoff_hz=3300.0, sample_rate=SAMPLE_RATE, numtaps=255):
    """Conventional DM demodulation: zero-phase windowed-sinc lowpass of the staircase.

    A Hamming-windowed FIR with an odd number of taps is applied centred on
    each sample, so there is no group delay; the frame is edge-padded to
    keep the ends from sagging towards zero.
    """
    y = stair.values if isinstance(stair, Staircase) else as_frame(stair, "staircase")
    if not 0 < cutoff_hz < sample_rate / 2:
        raise ValueError(f"cutoff must lie in (0, {sample_rate / 2}) Hz, got {cutoff_hz}")
    if numtaps % 2 == 0:
        raise ValueError("numtaps must be odd for an integer group delay")
    h = firwin(numtaps, cutoff_hz, window="hamming", fs=sample_rate)
    half = numtaps // 2
    padded = np.pad(y, half, mode="edge")
    return np.convolve(padded, h, mode="valid")


# ---------------------------------------------------------------------------
# OMP over the partial DFT dictionary
# ---------------------------------------------------------------------------


@dataclass
class OmpInfo:
    frequencies: list
    residual_norms: list


def _real_atoms(freqs, t, n):
    cols = []
    for m in freqs:
        w = 2 * np.pi * m * t / n
        cols.append(np.cos(w))
        if 0 < m < n / 2:
            cols.append(np.sin(w))
    return np.column_stack(cols)


def omp(masked, max_atoms=8, residual_tol=1e-9, return_info=False):
    """Orthogonal matching pursuit with real (conjugate-pair) Fourier atoms.

    One atom is a frequency bin ``m`` together with its mirror ``N - m``,
    i.e. a cosine/sine column pair on the retained rows. Each step picks the
    bin most correlated with the residual and refits all selected atoms by
    least squares. Stops after `max_atoms` atoms or once the residual norm
    drops to `residual_tol`.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the selected atoms are linearly dependent on the retained rows.
    """
    d = masked.mask.d
    n = d.size
    idx = np.flatnonzero(d)
    if max_atoms > idx.size:
        raise ValueError(f"max_atoms={max_atoms} exceeds the {idx.size} retained samples")
    y = masked.values[idx]
    m_count = idx.size
    half = n // 2 + 1
    col_energy = np.full(half, m_count / 2)
    col_energy[0] = m_count
    if n % 2 == 0:
        col_energy[-1] = m_count

    selected = []
    coef = np.zeros(0)
    residual = y.copy()
    norms = [float(np.linalg.norm(residual))]
    while len(selected) < max_atoms and norms[-1] > residual_tol:
        zf = np.zeros(n)
        zf[idx] = residual
        score = np.abs(np.fft.rfft(zf)) ** 2 / col_energy
        score[selected] = -1
        selected.append(int(np.argmax(score)))
        A = _real_atoms(selected, idx, n)
        coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
        if rank < A.shape[1]:
            raise np.linalg.LinAlgError(
                f"rank-deficient refit with {len(selected)} atoms on {m_count} samples")
        residual = y - A @ coef
        norms.append(float(np.linalg.norm(residual)))

    x = _real_atoms(selected, np.arange(n), n) @ coef if selected else np.zeros(n)
    if return_info:
        return x, OmpInfo(selected, norms)
    return x


# ---------------------------------------------------------------------------
# LASSO over spectra, by proximal gradient
# ---------------------------------------------------------------------------


@dataclass
class LassoInfo:
    objective: list
    iterations: int
    converged: bool


def lasso_reg_max(masked):
    """Smallest regularization weight for which the LASSO solution is zero."""
    return 2.0 / masked.mask.d.size * float(np.max(np.abs(np.fft.fft(masked.values * masked.mask.d))))


def _soft(S, t):
    mag = np.abs(S)
    scale = np.maximum(0.0, 1.0 - t / np.maximum(mag, np.finfo(float).tiny))
    return S * scale


def _hermitian(S):
    return 0.5 * (S + np.conj(np.roll(S[::-1], 1)))


def lasso(masked, reg, max_iters=500, tol=1e-6, return_info=False):
    """Solve ``min_S ||restrict(idft(S)) - y||^2 + reg * ||S||_1`` by ISTA.

    The restricted inverse DFT has operator norm at most ``1/sqrt(N)``, so
    the fixed step ``N/2`` is safe and each iteration needs two FFTs. If the
    relative change has not dropped below `tol` after `max_iters`
    iterations the lowest-objective iterate is returned and a
    :class:`ConvergenceWarning` is issued.
    """
    if not reg > 0:
        raise ValueError(f"reg must be positive, got {reg}")
    d = masked.mask.d
    n = d.size
    y = np.where(d, masked.values, 0.0)
    step = n / 2
    S = np.zeros(n, dtype=complex)

    def objective(S, x):
        r = (x - y)[d]
        return float(np.dot(r, r) + reg * np.sum(np.abs(S)))

    obj = [objective(S, np.zeros(n))]
    best, best_obj = S, obj[0]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        x = np.fft.ifft(S).real
        grad = np.fft.fft(np.where(d, x - y, 0.0))  # = step * 2 A^H (A S - y)
        S_new = _hermitian(_soft(S - grad, step * reg))
        change = np.linalg.norm(S_new - S)
        S = S_new
        obj.append(objective(S, np.fft.ifft(S).real))
        if obj[-1] <= best_obj:
            best, best_obj = S, obj[-1]
        if change <= tol * max(np.linalg.norm(S), np.finfo(float).tiny):
            converged = True
            break
    if not converged:
        warnings.warn(f"lasso did not converge in {max_iters} iterations",
                      ConvergenceWarning, stacklevel=2)
    x = np.fft.ifft(best).real
    if return_info:
        return x, LassoInfo(obj, it, converged)
    return x
