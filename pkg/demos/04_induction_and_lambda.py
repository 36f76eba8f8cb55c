"""
Inducing an inventory and calibrating the size penalty
======================================================

Plant 12 segments from a 40-glyph pool built around Javanese, generate 20
streams from them and see whether greedy selection gets them back. The
size penalty lambda must sit inside an interval where every planted
segment is worth keeping and every other one is not.
"""

import time
from pathlib import Path

from phonotypo.benchmarks import planted_fixture
from phonotypo.config import DEFAULT_LAMBDA
from phonotypo.induction import InductionParams, calibrate_lambda, induce_inventory
from phonotypo.typology import load_database

db = load_database(Path(__file__).resolve().parents[1] / "data" / "phoible.csv.gz",
                   conflict_policy="per_inventory")

fx = planted_fixture(db, 0)
print("neighbours:", [(lang, round(s, 3)) for lang, s in fx.neighbours])
print("planted:", " ".join(sorted(fx.planted.glyphs)))

t0 = time.perf_counter()
inv, trace = induce_inventory(fx.streams, fx.pool, InductionParams(lam=DEFAULT_LAMBDA))
print(f"induced in {time.perf_counter() - t0:.1f}s:", " ".join(sorted(inv.glyphs)))
for step in trace[:5]:
    print(f"  {step.action:<6} {step.glyph:<4} gain {step.gain:.2f}")
overlap = set(inv.glyphs) & set(fx.planted.glyphs)
print("Jaccard", len(overlap) / len(set(inv.glyphs) | set(fx.planted.glyphs)))

###############################################################################
# The interval for this one fixture. The shipped default is the midpoint
# of the intersection over planted seeds 0 to 5.

cal = calibrate_lambda(fx.streams, fx.planted, fx.pool)
print(f"valid lambda in ({cal['lower']:.4f}, {cal['upper']:.4f}); default {DEFAULT_LAMBDA}")
