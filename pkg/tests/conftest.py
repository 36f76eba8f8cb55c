import io
import os
from pathlib import Path

import pytest

from phonotypo.benchmarks import load_transfer_benchmark
from phonotypo.typology import load_database, parse_phoible

REPO = Path(__file__).resolve().parents[1]
PHOIBLE = Path(os.environ.get("PHONOTYPO_PHOIBLE", REPO / "data" / "phoible.csv.gz"))

# three features keep hand computations short
TINY_CSV = """\
InventoryID,LanguageName,ISO6393,Source,Phoneme,SegmentClass,voice,sonorant,syllabic
1,Alpha,aaa,src1,p,consonant,-,-,-
1,Alpha,aaa,src1,b,consonant,+,-,-
1,Alpha,aaa,src1,m,consonant,+,+,-
2,Alpha,aaa,src2,p,consonant,-,-,-
2,Alpha,aaa,src2,a,vowel,+,+,+
3,Beta,bbb,src1,t,consonant,-,-,-
"""


def parse_text(text, **kw):
    return parse_phoible(io.BytesIO(text.encode("utf-8")), **kw)


@pytest.fixture(scope="session")
def tiny_db():
    return parse_text(TINY_CSV)


@pytest.fixture(scope="session")
def phoible_db():
    if not PHOIBLE.exists():
        pytest.skip(f"PHOIBLE file not found at {PHOIBLE}")
    return load_database(PHOIBLE, conflict_policy="per_inventory")


@pytest.fixture(scope="session")
def bench():
    return load_transfer_benchmark()


# greedy-vs-exhaustive fixtures: seeds where the two agree were fixed after
# checking the oracle; 6, 10 and 12 are the known suboptimal cases in 0..39
ORACLE_SEEDS = (0, 1, 2)
KNOWN_SUBOPTIMAL = {6: 0.4414, 10: 1.2723, 12: 0.7899}


def small_fixture(db, seed):
    """Pool of 8 benchmark glyphs, 3 planted, 3 streams of 6 frames."""
    import numpy as np
    from phonotypo.decoder import generate_stream
    from phonotypo.induction import CandidatePool
    rng = np.random.default_rng(seed)
    pool_g = [str(g) for g in sorted(rng.choice(sorted(db.segments), 8, replace=False))]
    weights = {g: float(rng.integers(1, 10)) / 10 for g in pool_g}
    pool = CandidatePool(weights, {g: db.segments[g] for g in pool_g})
    planted = [str(g) for g in sorted(rng.choice(pool_g, 3, replace=False))]
    streams = [generate_stream([db.segments[g] for g in planted], 6, 2.0, 0.9, 0.1, 0.1,
                               seed=seed * 100 + i)[0] for i in range(3)]
    return pool, streams


# acceptance verdicts, filled by test_acceptance and echoed after the run
VERDICTS: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for ac in sorted(VERDICTS):
        ok, detail = VERDICTS[ac]
        terminalreporter.write_line(f"{ac} {'PASS' if ok else 'FAIL'}  {detail}")
