"""
Loading PHOIBLE and querying inventories
========================================

Parse the bundled PHOIBLE long-format file, look at what the loader
counted, then compare the three Javanese inventories.
"""

import time
from pathlib import Path

from phonotypo.typology import inventories_for_language, load_database, segments_matching

DATA = Path(__file__).resolve().parents[1] / "data" / "phoible.csv.gz"

t0 = time.perf_counter()
db = load_database(DATA, conflict_policy="per_inventory")
print(f"parsed in {time.perf_counter() - t0:.1f}s")
for key, value in db.summary().items():
    print(f"  {key:>15}: {value}")

###############################################################################
# Javanese has three inventories from different sources. Only one of them
# writes retroflex plosives.

for inv in inventories_for_language(db, "Javanese"):
    retro = sorted(set(inv.glyphs) & {"ʈ", "ɖ"})
    print(f"{inv.inventory_id:>5} {inv.source:<6} {len(inv):3d} segments  retroflex: {retro or '-'}")

###############################################################################
# Feature queries work on the ternary vectors. Coronal stops that are
# not anterior are the retroflex and palatal region.

hits = segments_matching(db, {"coronal": "+", "anterior": "-", "continuant": "-", "sonorant": "-"})
print(len(hits), "segments, e.g.", " ".join(s.glyph for s in hits[:15]))
