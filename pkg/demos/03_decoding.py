"""
Decoding feature posteriors into segments
=========================================

Generate a noisy posterior stream from a known inventory, decode it with
the inventory as the only allowed segments, and compare against the truth.
"""

from phonotypo.benchmarks import load_transfer_benchmark
from phonotypo.decoder import DecodeParams, constrained_decode, generate_stream

db, _ = load_transfer_benchmark()
inv = db.inventories["1"]
print("inventory:", " ".join(sorted(inv.glyphs)))

stream, truth = generate_stream(inv, 120, mean_run_length=6, noise_sigma=0.15, seed=4)
print(stream.n_frames, "frames x", len(stream.feature_names), "features")

###############################################################################
# A switch penalty trades frame accuracy for fewer spurious runs.

for pen in (0.0, 0.5, 2.0):
    ali = constrained_decode(stream, inv, DecodeParams(switch_penalty=pen))
    agree = sum(a == b for a, b in zip(ali.labels(), truth.labels())) / stream.n_frames
    print(f"penalty {pen:3.1f}: {len(ali.runs):3d} runs (truth {len(truth.runs)}), frame agreement {agree:.3f}")

ali = constrained_decode(stream, inv, DecodeParams(switch_penalty=0.5, min_duration=2))
print("first runs:", [(s.glyph, a, b) for s, a, b in ali.runs[:6]])
