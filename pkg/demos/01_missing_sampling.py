"""Delta modulation as missing sampling.

Encode a voice-like frame, look at where the modulator oscillates
(granular region) and where it lags (slope overload), and keep only the
oscillating samples as a sampling mask. Larger steps overload less often,
so more samples survive.
"""
import numpy as np

from dmsparse import codec, harness

frame = harness.mixed_band_corpus(1, seed=4)[0]

for delta in (0.001, 0.005, 0.01, 0.02, 0.03):
    bits, stair = codec.dm_encode(frame, delta)
    mask = codec.extract_mask(bits)
    err = np.abs(stair.values - frame)[mask.d]
    print(f"delta={delta:<6} kept {mask.rate:5.1%} of samples, "
          f"max error on kept samples {err.max() / delta:.2f} steps")

# the retained samples carry a +-delta/2-ish error that flips sign every sample
bits, stair = codec.dm_encode(frame, 0.01)
mask = codec.extract_mask(bits)
idx = mask.indices[:12]
print("\nfirst retained samples (index, staircase - input):")
for i in idx:
    print(f"  {i:4d}  {stair.values[i] - frame[i]:+.4f}")

# same thing on a file, if you have one:
#   dmsparse encode --in voice.wav --delta 0.01 --out voice.dmbs
