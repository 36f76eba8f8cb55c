"""
Which Javanese inventory fits the data better?
==============================================

One Javanese inventory has retroflex plosives and another does not. Score
both against streams generated from each and check the ranking flips.
"""

from pathlib import Path

from phonotypo.config import DEFAULT_LAMBDA
from phonotypo.decoder import generate_stream
from phonotypo.induction import InductionParams, score_inventory
from phonotypo.typology import load_database

db = load_database(Path(__file__).resolve().parents[1] / "data" / "phoible.csv.gz",
                   conflict_policy="per_inventory")
names = db.feature_system.feature_names
retro, plain = db.inventories["1675"], db.inventories["380"]
print("only in 1675:", " ".join(sorted(set(retro.glyphs) - set(plain.glyphs))))
print("only in 380: ", " ".join(sorted(set(plain.glyphs) - set(retro.glyphs))))

params = InductionParams(lam=DEFAULT_LAMBDA)
for source in (retro, plain):
    streams = [generate_stream(source, 200, seed=500 + i, feature_names=names)[0] for i in range(10)]
    row = {inv.inventory_id: score_inventory(streams, inv, params) for inv in (retro, plain)}
    best = max(row, key=lambda k: row[k].penalized)
    print(f"streams from {source.inventory_id}: "
          + ", ".join(f"{k} fit {v.fit:.1f} penalized {v.penalized:.1f}" for k, v in row.items())
          + f"  -> {best}")
