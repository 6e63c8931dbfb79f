"""Five reconstructors on a mixed-band synthetic corpus.

Half of each frame's energy sits just above 3.3 kHz, which the usual DM
lowpass demodulator throws away. The sparse methods can recover it from the
granular samples. Pass a frame count to go bigger (default 40):

    python demos/04_method_comparison.py 200
"""
import sys

from dmsparse import codec, harness

n = int(sys.argv[1]) if len(sys.argv) > 1 else 40
frames = harness.mixed_band_corpus(n, seed=0)

table = harness.delta_sweep(frames, [0.005, 0.01, 0.02])
print(f"DM, {n} frames, success threshold 15 dB")
print(harness.report_text(table))

adm = harness.adm_benchmark(frames, codec.AdmParams(0.01))
print("ADM, delta0 = 0.01, success threshold 20 dB")
print(harness.report_text(adm))

clean = harness.delta_sweep(frames, [0.01], ["imat", "imatdm"],
                            harness.SweepConfig(noiseless=True))
print("same masks, clean samples (coding error removed):")
print(harness.report_text(clean))
