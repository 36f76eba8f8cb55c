import numpy as np
import pytest

from phonotypo.config import DEFAULT_LAMBDA
from phonotypo.decoder import FeatureStream, score_matrix
from phonotypo.errors import UsageError
from phonotypo.induction import (CandidatePool, InductionParams, InventoryScore, LanguagePrior,
                                 admissibility_filter, build_candidate_pool, calibrate_lambda,
                                 induce_inventory, inventory_similarity, nearest_languages,
                                 score_inventory, seed_inventory)

from conftest import KNOWN_SUBOPTIMAL, ORACLE_SEEDS, parse_text, small_fixture
from oracles import exhaustive_best_subset

FOUR = """\
InventoryID,LanguageName,Source,Phoneme,SegmentClass,voice,sonorant,coronal
1,Anchor,s,p,consonant,-,-,-
1,Anchor,s,t,consonant,-,-,+
1,Anchor,s,k,consonant,-,-,-
1,Anchor,s,m,consonant,+,+,-
2,Near,s,p,consonant,-,-,-
2,Near,s,t,consonant,-,-,+
2,Near,s,k,consonant,-,-,-
3,Mid,s,p,consonant,-,-,-
3,Mid,s,t,consonant,-,-,+
3,Mid,s,n,consonant,+,+,+
4,Mid,s,p,consonant,-,-,-
4,Mid,s,ʈ,consonant,-,-,+
5,Far,s,b,consonant,+,-,-
5,Far,s,n,consonant,+,+,+
"""


@pytest.fixture(scope="module")
def four():
    return parse_text(FOUR)


def test_prior_validation():
    with pytest.raises(UsageError):
        LanguagePrior({"a": 0.5, "b": 0.4})
    with pytest.raises(UsageError):
        LanguagePrior({"a": 1.5, "b": -0.5})
    assert LanguagePrior.normalized({"a": 2, "b": 2}).weights == {"a": 0.5, "b": 0.5}


def test_similarity_examples(four):
    a = four.inventories["1"]
    assert inventory_similarity(a, a) == 1.0 and inventory_similarity(a, a, "feature_match") == 1.0
    assert inventory_similarity(four.inventories["2"], four.inventories["5"]) == 0.0
    pt = [four.segments["p"], four.segments["t"]]
    pk = [four.segments["p"], four.segments["k"]]
    assert inventory_similarity(pt, pk) == pytest.approx(1 / 3)
    with pytest.raises(UsageError):
        inventory_similarity(pt, pk, "cosine")


def test_nearest_with_prior(four):
    assert nearest_languages(four, LanguagePrior({"Near": 1.0})) == [("Near", 1.0)]


def test_nearest_hand_jaccard(four):
    seed = four.inventories["1"]             # {p,t,k,m}
    ranked = nearest_languages(four, seed, k=4)
    # Near {p,t,k}: 3/4; Mid best of {p,t,n} 2/5 and {p,ʈ} 1/5; Far 0
    assert ranked == [("Anchor", 1.0), ("Near", 0.75), ("Mid", 0.4), ("Far", 0.0)]
    assert nearest_languages(four, four.inventories["2"], k=1) == [("Near", 1.0)]
    with pytest.raises(UsageError):
        nearest_languages(four, [], k=1)
    with pytest.raises(UsageError):
        nearest_languages(four, seed, k=0)


def test_pool_weights(four):
    single = build_candidate_pool(four, [("Near", 0.8)])
    assert single.entries == {"k": 0.8, "p": 0.8, "t": 0.8}
    # Mid has two inventories: p in both, t/n/ʈ in one each
    mixed = build_candidate_pool(four, [("Near", 0.7), ("Mid", 0.3)])
    assert mixed.entries["p"] == pytest.approx(1.0)
    assert mixed.entries["t"] == pytest.approx(0.7 + 0.15)
    assert mixed.entries["ʈ"] == pytest.approx(0.15)
    with pytest.raises(UsageError):
        build_candidate_pool(four, [("Near", 0.0)])
    with pytest.raises(UsageError):
        build_candidate_pool(four, [])


def test_pool_merge_drops_indistinguishable(four):
    pool = build_candidate_pool(four, [("Anchor", 1.0)], merge_indistinguishable=True)
    # p and k share a vector and a weight; the glyph-order tie keeps k
    assert set(pool.entries) == {"k", "m", "t"}


def test_score_singleton_equals_frame_sum(four):
    rng = np.random.default_rng(0)
    names = four.feature_system.feature_names
    stream = FeatureStream(names, rng.random((7, 3)))
    s = four.segments["t"]
    sc = score_inventory([stream], [s], InductionParams(lam=0.3))
    direct = score_matrix(stream, [s])[0][:, 0].sum()
    assert sc.fit == pytest.approx(direct, abs=1e-12)
    assert sc.penalty == 0.3 and sc.penalized == sc.fit - sc.penalty


def test_inventory_score_arithmetic():
    sc = InventoryScore.from_fits([-1.5, -2.25], 3, 0.5)
    assert sc.fit == -3.75 and sc.penalty == 3.0 and sc.penalized == -6.75


def test_fit_monotone_in_inventory(bench):
    db, _ = bench
    rng = np.random.default_rng(1)
    glyphs = sorted(db.segments)
    names = db.feature_system.feature_names
    params = InductionParams(lam=0.0)
    for _ in range(200):
        sup = [db.segments[g] for g in rng.choice(glyphs, int(rng.integers(2, 7)), replace=False)]
        sub = sup[:int(rng.integers(1, len(sup)))]
        stream = FeatureStream(names, rng.random((int(rng.integers(1, 9)), len(names))))
        assert score_inventory([stream], sup, params).fit >= score_inventory([stream], sub, params).fit


def test_default_lambda_is_shipped_value():
    assert InductionParams().lam == DEFAULT_LAMBDA == 0.485


def test_induce_pool_of_one(four):
    stream = FeatureStream(four.feature_system.feature_names, np.full((4, 3), 0.5))
    inv, trace = induce_inventory([stream], CandidatePool.from_segments([four.segments["p"]]))
    assert inv.glyphs == {"p"} and trace[0].gain == float("inf")
    with pytest.raises(UsageError):
        induce_inventory([stream], CandidatePool({}, {}))


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_trace_gains_match_rescoring(bench, seed):
    db, _ = bench
    pool, streams = small_fixture(db, seed)
    params = InductionParams()
    inv, trace = induce_inventory(streams, pool, params)
    current = set()
    prev = -np.inf
    for step in trace:
        current = current | {step.glyph} if step.action == "add" else current - {step.glyph}
        now = score_inventory(streams, [pool.segments[g] for g in sorted(current)], params).penalized
        if np.isfinite(prev):
            assert abs((now - prev) - step.gain) <= 1e-9
        prev = now
    assert current == set(inv.glyphs)
    best_single = max(score_inventory(streams, [s], params).penalized for s in pool.segments.values())
    assert score_inventory(streams, inv, params).penalized >= best_single


def _oracle(pool, streams, params):
    return exhaustive_best_subset(
        lambda sub: score_inventory(streams, [pool.segments[g] for g in sub], params).penalized,
        list(pool.entries))


@pytest.mark.parametrize("seed", ORACLE_SEEDS)
def test_greedy_equals_exhaustive_on_fixtures(bench, seed):
    db, _ = bench
    pool, streams = small_fixture(db, seed)
    params = InductionParams()
    inv, _ = induce_inventory(streams, pool, params)
    best, winners = _oracle(pool, streams, params)
    assert inv.glyphs in winners
    assert score_inventory(streams, inv, params).penalized == pytest.approx(best, abs=1e-9)


@pytest.mark.parametrize("seed,gap", sorted(KNOWN_SUBOPTIMAL.items()))
def test_documented_suboptimal_fixtures(bench, seed, gap):
    db, _ = bench
    pool, streams = small_fixture(db, seed)
    params = InductionParams()
    inv, _ = induce_inventory(streams, pool, params)
    best, winners = _oracle(pool, streams, params)
    got = score_inventory(streams, inv, params).penalized
    assert inv.glyphs not in winners
    assert best - got == pytest.approx(gap, abs=1e-4)


def test_admissibility_modes(four):
    kept, rep = admissibility_filter({"p", "t"}, four, mode="co_occurrence")
    assert rep["containment"] == 1.0 and rep["admissible"] and kept == {"p", "t"}
    # no inventory holds both p and ʈ
    apart = parse_text(FOUR.replace("4,Mid,s,p,consonant,-,-,-\n", ""))
    kept, rep = admissibility_filter({"p", "ʈ"}, apart, mode="co_occurrence", min_containment=0.8)
    assert rep["containment"] == 0.5 and not rep["admissible"]
    kept, rep = admissibility_filter({"p", "ʡ"}, four, min_attestation=1)
    assert kept == {"p"} and rep["removed"] == ["ʡ"]
    with pytest.raises(UsageError):
        admissibility_filter({"p"}, four, min_attestation=0)


def test_admissibility_monotone_in_threshold(four):
    hyp = set(four.segments)
    sizes = [len(admissibility_filter(hyp, four, min_attestation=m)[0]) for m in range(1, 6)]
    assert sizes == sorted(sizes, reverse=True)


def test_calibration_interval_contains_default(phoible_db):
    from phonotypo.benchmarks import planted_fixture
    fx = planted_fixture(phoible_db, 1)
    cal = calibrate_lambda(fx.streams, fx.planted, fx.pool)
    assert cal["valid"] and cal["lower"] < DEFAULT_LAMBDA < cal["upper"]
    assert cal["upper"] == pytest.approx(0.9706, abs=1e-4)


def test_javanese_pool_has_partial_retroflex_weight(phoible_db):
    anchor = seed_inventory(phoible_db, "Javanese")
    pool = build_candidate_pool(phoible_db, [("Javanese", 1.0)])
    assert anchor.inventory_id == "1675"
    retro = [g for g in pool.entries if g in ("ʈ", "ɖ")]
    assert retro and all(0 < pool.entries[g] < 1.0 for g in retro)
