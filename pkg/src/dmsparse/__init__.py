"""Delta-modulation coding with sparse (IMAT/IMATDM) reconstruction."""
from .analysis import (decompose_variance, geometric_error_check, guard_check,
                       monte_carlo_imat, predicted_variance, validate_theorem1)
from .codec import (AdmParams, Bitstream, MaskedSignal, SamplingMask, Staircase, adm_decode,
                    adm_encode, bernoulli_mask, dm_decode, dm_encode, extract_mask,
                    iid_model_sample, masked_signal, read_bitstream, write_bitstream)
from .core import FRAME_LEN, SAMPLE_RATE, SnrDb, energy, frame_split, snr_db, success_rate
from .harness import (ReportTable, SweepConfig, SyntheticSpec, adm_benchmark, delta_sweep,
                      emit_report, load_wav, mixed_band_corpus, synth_sparse_frame, write_wav)
from .recon import (ImatParams, imat, imat_step, imatdm, lasso, lowpass_reconstruct, omp)
from .spectral import ThresholdSchedule, dft, hard_threshold, idft, smooth_retained

__version__ = "0.1.0"
