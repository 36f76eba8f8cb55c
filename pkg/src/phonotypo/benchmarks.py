"""Seeded benchmark fixtures shipped with the package.

Three workflows live here so that tests, demos and the CLI share one
definition of each:

* the two-family contrast transfer benchmark,
* planted-inventory recovery from a Javanese neighbourhood pool,
* the calibration that produced the default size penalty.
"""

import io
import json
from dataclasses import dataclass

import numpy as np

from .config import package_data
from .contrast import (ContrastSpec, FamilyShift, Hyper, RealizationParams, evaluate_heldout,
                       leave_one_language_out, pooled_accuracy)
from .decoder import DecodeParams, FeatureStream, generate_stream
from .induction import (CandidatePool, build_candidate_pool, calibrate_lambda, nearest_languages,
                        seed_inventory)
from .typology import Inventory, TypologyDatabase, parse_phoible


def load_transfer_benchmark() -> tuple[TypologyDatabase, dict]:
    """Return the eight-language benchmark database and its config."""
    cfg = json.loads(package_data("transfer_benchmark.json").read_text(encoding="utf-8"))
    raw = package_data(cfg["database"]).read_bytes()
    db = parse_phoible(io.BytesIO(raw))
    return db, cfg


def transfer_benchmark(db: TypologyDatabase | None = None, cfg: dict | None = None, *,
                       noise_sigma: float | None = None, seed: int | None = None) -> dict:
    """Run the shared and family-shifted transfer protocols.

    ``shared``
        leave-one-language-out over all languages with no family shift.
    ``in_family``
        leave-one-language-out inside the first family, with the second
        family's realization flipped (it is never seen, so this is the
        same-family reference).
    ``cross_family``
        train on every first-family language, test on each second-family
        language whose realization has the flipped features.

    Returns macro accuracies and ``gap = in_family - cross_family``.
    """
    if db is None or cfg is None:
        db0, cfg0 = load_transfer_benchmark()
        db, cfg = db or db0, cfg or cfg0
    contrast = ContrastSpec.from_dict(cfg["contrast"])
    real = dict(cfg["realization"])
    if noise_sigma is not None:
        real["noise_sigma"] = noise_sigma
    if seed is not None:
        real["seed"] = seed
    plain = RealizationParams.from_dict(real)
    shifted = RealizationParams(plain.dim, plain.noise_sigma,
                                {cfg["shifted_family"]: FamilyShift(tuple(cfg["flip"]))}, plain.seed)
    hyper = Hyper.from_dict(cfg.get("hyper", {}))
    repeats = int(cfg.get("repeats", 1))
    a, b = list(cfg["in_family"]), list(cfg["out_family"])

    shared = pooled_accuracy(leave_one_language_out(db, contrast, a + b, "synthetic", plain, hyper, repeats))
    in_family = pooled_accuracy(leave_one_language_out(db, contrast, a, "synthetic", shifted, hyper, repeats))
    cross = evaluate_heldout(db, contrast, a, b, "synthetic", shifted, hyper, repeats)
    return {"shared": shared, "in_family": in_family, "cross_family": cross.macro_accuracy,
            "gap": in_family - cross.macro_accuracy, "noise_sigma": plain.noise_sigma,
            "seed": plain.seed, "cross_family_per_language":
                {k: v["accuracy"] for k, v in cross.per_language.items()}}


@dataclass(frozen=True)
class PlantedFixture:
    pool: CandidatePool
    planted: Inventory
    streams: tuple[FeatureStream, ...]
    neighbours: tuple[tuple[str, float], ...]


def javanese_pool(db: TypologyDatabase, seed_language: str = "Javanese", neighbours: int = 5,
                  pool_size: int = 40):
    """Candidate pool from the ``neighbours`` languages closest to ``seed_language``."""
    anchor = seed_inventory(db, seed_language)
    ranked = nearest_languages(db, anchor, "jaccard", neighbours)
    pool = build_candidate_pool(db, ranked, max_size=pool_size, merge_indistinguishable=True)
    return pool, ranked


def planted_fixture(db: TypologyDatabase, planted_seed: int, *, planted_size: int = 12,
                    n_streams: int = 20, n_frames: int = 200, mean_run_length: float = 5.0,
                    mu_plus: float = 0.9, mu_minus: float = 0.1, noise_sigma: float = 0.1,
                    pool=None, seed_language: str = "Javanese") -> PlantedFixture:
    """Plant a random ``planted_size`` subset of the pool and generate streams from it.

    Stream ``i`` uses generator seed ``1000 * planted_seed + i``.
    """
    if pool is None:
        pool, ranked = javanese_pool(db, seed_language)
    else:
        ranked = ()
    glyphs = sorted(np.random.default_rng(planted_seed).choice(list(pool.entries), planted_size,
                                                               replace=False))
    segs = tuple(pool.segments[g] for g in glyphs)
    planted = Inventory(f"planted-{planted_seed}", "planted", segs)
    streams = tuple(generate_stream(segs, n_frames, mean_run_length, mu_plus, mu_minus, noise_sigma,
                                    seed=1000 * planted_seed + i)[0] for i in range(n_streams))
    return PlantedFixture(pool, planted, streams, tuple(ranked))


def calibrate_default_lambda(db: TypologyDatabase, planted_seeds=(0, 1, 2, 3, 4, 5),
                             decode: DecodeParams = DecodeParams()) -> dict:
    """Intersect per-seed admissible penalty intervals and take the midpoint."""
    pool, _ = javanese_pool(db)
    per_seed = {}
    for s in planted_seeds:
        fx = planted_fixture(db, s, pool=pool)
        cal = calibrate_lambda(fx.streams, fx.planted, pool, decode)
        per_seed[s] = (cal["lower"], cal["upper"])
    lo = max(v[0] for v in per_seed.values())
    hi = min(v[1] for v in per_seed.values())
    return {"per_seed": per_seed, "lower": lo, "upper": hi, "valid": lo < hi,
            "lambda": round(0.5 * (lo + hi), 3)}
