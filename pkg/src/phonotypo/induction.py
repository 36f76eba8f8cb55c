"""Closest-language ranking, candidate pools, penalized inventory scoring and greedy induction."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import NamedTuple

import numpy as np

from .config import DEFAULT_LAMBDA, DEFAULT_MIN_CONTAINMENT
from .decoder import (DecodeParams, FeatureStream, best_path_scores, constrained_decode,
                      score_matrix)
from .errors import SegmentNotFound, UsageError
from .typology import (Inventory, Segment, TypologyDatabase, feature_distance,
                       inventories_for_language, natural_key, normalize_glyph)

@dataclass(frozen=True)
class LanguagePrior:
    """Externally supplied language probabilities (e.g. a language-ID posterior)."""

    weights: Mapping[str, float]

    def __post_init__(self):
        w = dict(self.weights)
        if not w:
            raise UsageError("empty language prior")
        if any(not (v >= 0) or math.isinf(v) for v in w.values()):
            raise UsageError("language prior weights must be finite and >= 0")
        total = sum(w.values())
        if abs(total - 1.0) > 1e-9:
            raise UsageError(f"language prior weights sum to {total}, not 1")
        object.__setattr__(self, "weights", MappingProxyType(w))

    @classmethod
    def normalized(cls, weights: Mapping[str, float]) -> "LanguagePrior":
        total = sum(weights.values())
        if not total > 0:
            raise UsageError("language prior weights must not all be zero")
        return cls({k: v / total for k, v in weights.items()})


@dataclass(frozen=True)
class CandidatePool:
    """Glyph to aggregated weight, plus the segment each glyph stands for."""

    entries: Mapping[str, float]
    segments: Mapping[str, Segment] = field(repr=False)

    def __post_init__(self):
        entries = dict(sorted(self.entries.items()))
        if any(not w > 0 for w in entries.values()):
            raise UsageError("pool weights must be > 0")
        if set(entries) - set(self.segments):
            raise UsageError("pool glyphs without segments")
        object.__setattr__(self, "entries", MappingProxyType(entries))
        object.__setattr__(self, "segments", MappingProxyType({g: self.segments[g] for g in entries}))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def ranked(self) -> list[tuple[str, float]]:
        return sorted(self.entries.items(), key=lambda kv: (-kv[1], kv[0]))

    def top(self, n: int) -> "CandidatePool":
        keep = dict(self.ranked()[:n])
        return CandidatePool(keep, {g: self.segments[g] for g in keep})

    def restrict(self, glyphs: Iterable[str]) -> "CandidatePool":
        keep = {g: self.entries[g] for g in glyphs}
        return CandidatePool(keep, {g: self.segments[g] for g in keep})

    @classmethod
    def from_segments(cls, segments: Iterable[Segment], weight: float = 1.0) -> "CandidatePool":
        segs = {s.glyph: s for s in segments}
        return cls({g: weight for g in segs}, segs)


@dataclass(frozen=True)
class InductionParams:
    lam: float = DEFAULT_LAMBDA
    max_size: int = 64
    epsilon_gain: float = 0.0
    decode: DecodeParams = DecodeParams()
    prune: bool = True

    def __post_init__(self):
        if not self.lam >= 0 or math.isinf(self.lam):
            raise UsageError(f"lambda must be finite and >= 0, got {self.lam}")
        if int(self.max_size) != self.max_size or self.max_size < 1:
            raise UsageError(f"max_size must be a positive integer, got {self.max_size}")
        if not self.epsilon_gain >= 0:
            raise UsageError(f"epsilon_gain must be >= 0, got {self.epsilon_gain}")

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "max_size": self.max_size, "epsilon_gain": self.epsilon_gain,
                "prune": self.prune,
                "switch_penalty": self.decode.switch_penalty, "top_k": self.decode.top_k,
                "min_duration": self.decode.min_duration,
                "clamp_epsilon": self.decode.clamp_epsilon}


@dataclass(frozen=True)
class InventoryScore:
    fit: float
    penalty: float
    penalized: float
    per_stream: tuple[float, ...]
    size: int

    @classmethod
    def from_fits(cls, per_stream: Sequence[float], size: int, lam: float) -> "InventoryScore":
        fit = 0.0
        for f in per_stream:
            fit += f
        penalty = lam * size * len(per_stream)
        return cls(fit, penalty, fit - penalty, tuple(float(f) for f in per_stream), size)

    def to_dict(self) -> dict:
        return {"size": self.size, "fit": self.fit, "penalty": self.penalty,
                "penalized": self.penalized, "per_stream": list(self.per_stream)}


def _segments(inventory) -> tuple[Segment, ...]:
    return inventory.segments if isinstance(inventory, Inventory) else tuple(inventory)


def _distance_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized :func:`feature_distance` (``specified_only``) between sign matrices."""
    both = (a != 0)[:, None, :] & (b != 0)[None, :, :]
    differ = (both & (a[:, None, :] != b[None, :, :])).sum(-1)
    n = both.sum(-1)
    return np.where(n > 0, differ / np.maximum(n, 1), 0.0)


def _signs(inventory) -> np.ndarray:
    return np.stack([s.features.signs for s in _segments(inventory)])


def inventory_similarity(a, b, metric: str = "jaccard") -> float:
    """Similarity in [0, 1] between two inventories.

    ``jaccard`` compares glyph sets. ``feature_match`` is one minus the
    symmetrized mean, over each inventory's segments, of the distance to the
    closest segment of the other inventory.
    """
    if metric == "jaccard":
        ga = {s.glyph for s in _segments(a)}
        gb = {s.glyph for s in _segments(b)}
        union = ga | gb
        return len(ga & gb) / len(union) if union else 1.0
    if metric == "feature_match":
        d = _distance_matrix(_signs(a), _signs(b))
        return float(1.0 - 0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean()))
    raise UsageError(f"unknown similarity metric {metric!r}")


def seed_inventory(db: TypologyDatabase, language: str) -> Inventory:
    """The largest inventory of ``language`` (lowest id among equals)."""
    invs = inventories_for_language(db, language)
    if not invs:
        raise UsageError(f"no inventories for language {language!r}")
    return sorted(invs, key=lambda inv: (-len(inv), natural_key(inv.inventory_id)))[0]


def resolve_language(db: TypologyDatabase, key: str) -> str:
    """Display name for a language given by name or ISO 639-3 code."""
    if key in db.by_language:
        return db.by_language.display_name(key)
    invs = inventories_for_language(db, key)
    if not invs:
        raise UsageError(f"unknown language {key!r}")
    return db.language_of(invs[0])


def nearest_languages(db: TypologyDatabase, anchor, metric: str = "jaccard", k: int = 5,
                      exclude: Iterable[str] = ()) -> list[tuple[str, float]]:
    """Rank languages against an anchor and return the top ``k``.

    ``anchor`` is a :class:`LanguagePrior` (languages ranked by prior weight)
    or a seed :class:`Inventory` (languages ranked by their best inventory
    similarity to it). Ties are broken by language name.
    """
    if int(k) != k or k < 1:
        raise UsageError(f"k must be a positive integer, got {k}")
    skip = {resolve_language(db, x).casefold() for x in exclude}
    if isinstance(anchor, LanguagePrior):
        scores = {}
        for key, w in anchor.weights.items():
            name = resolve_language(db, key)
            scores[name] = scores.get(name, 0.0) + w
    elif isinstance(anchor, Inventory) or (not isinstance(anchor, (str, bytes))
                                           and isinstance(anchor, Iterable)):
        seed = _segments(anchor)
        if not seed:
            raise UsageError("empty seed inventory")
        scores = {}
        if metric == "feature_match":
            seed_signs = _signs(seed)
        for name in db.by_language:
            best = 0.0
            for inv_id in db.by_language[name]:
                inv = db.inventories[inv_id]
                if metric == "feature_match":
                    d = _distance_matrix(seed_signs, _signs(inv))
                    sim = float(1.0 - 0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean()))
                else:
                    sim = inventory_similarity(seed, inv, metric)
                best = max(best, sim)
            scores[name] = best
    else:
        raise UsageError("anchor must be a LanguagePrior or a seed inventory")
    ranked = sorted(((n, s) for n, s in scores.items() if n.casefold() not in skip),
                    key=lambda kv: (-kv[1], kv[0].casefold(), kv[0]))
    return ranked[:int(k)]


def build_candidate_pool(db: TypologyDatabase, ranked: Sequence[tuple[str, float]],
                         max_size: int | None = None,
                         merge_indistinguishable: bool = False) -> CandidatePool:
    """Aggregate glyph weights: sum over languages of score times attestation share.

    A glyph's share within a language is the fraction of that language's
    inventories containing it. ``merge_indistinguishable`` drops any glyph
    whose vector is at distance 0 (over co-specified features) from a heavier
    glyph already kept; the frame scorer cannot separate such pairs. Then
    ``max_size`` keeps only the heaviest glyphs.
    """
    if not ranked:
        raise UsageError("no ranked languages for the candidate pool")
    if any(not (s >= 0) for _, s in ranked):
        raise UsageError("language scores must be >= 0")
    if not any(s > 0 for _, s in ranked):
        raise UsageError("all language scores are zero")
    weights: dict[str, float] = {}
    for lang, score in ranked:
        ids = db.by_language[resolve_language(db, lang)]
        counts: dict[str, int] = {}
        for inv_id in ids:
            for g in db.inventories[inv_id].glyphs:
                counts[g] = counts.get(g, 0) + 1
        for g in sorted(counts):
            weights[g] = weights.get(g, 0.0) + score * (counts[g] / len(ids))
    weights = {g: w for g, w in weights.items() if w > 0}
    pool = CandidatePool(weights, {g: db.segments[g] for g in weights})
    if merge_indistinguishable:
        kept: list[str] = []
        for g, _ in pool.ranked():
            vec = pool.segments[g].features
            if all(feature_distance(vec, pool.segments[k].features) > 0 for k in kept):
                kept.append(g)
        pool = pool.restrict(kept)
    return pool.top(max_size) if max_size is not None else pool


def _check_streams(streams) -> list[FeatureStream]:
    streams = list(streams)
    if not streams:
        raise UsageError("no streams to score")
    return streams


def score_inventory(streams: Sequence[FeatureStream], inventory, params: InductionParams = InductionParams(),
                    max_workers: int | None = None) -> InventoryScore:
    """Penalized fit: summed best-path scores minus ``lam * size * n_streams``."""
    streams = _check_streams(streams)
    segs = _segments(inventory)
    if not segs:
        raise UsageError("cannot score an empty inventory")

    def fit(stream):
        return constrained_decode(stream, segs, params.decode).total_log_score

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as ex:
            per_stream = list(ex.map(fit, streams))
    else:
        per_stream = [fit(s) for s in streams]
    size = len({s.glyph for s in segs})
    return InventoryScore.from_fits(per_stream, size, params.lam)


def _prune_dense(dense: np.ndarray, k: int) -> np.ndarray:
    if k >= dense.shape[-1]:
        return dense
    order = np.argsort(-dense, axis=-1, kind="stable")
    out = np.full_like(dense, -np.inf)
    keep = order[..., :k]
    np.put_along_axis(out, keep, np.take_along_axis(dense, keep, axis=-1), axis=-1)
    return out


class Step(NamedTuple):
    glyph: str
    gain: float
    action: str = "add"


def induce_inventory(streams: Sequence[FeatureStream], pool: CandidatePool,
                     params: InductionParams = InductionParams()):
    """Greedy forward selection of pool glyphs under the penalized fit.

    Each step adds the glyph with the largest gain in penalized score; ties go
    to the higher pool weight, then glyph order. The empty inventory admits no
    alignment, so its score is ``-inf`` and the first step (gain ``inf``)
    always adds the best single segment. Stops when the best gain is
    ``<= epsilon_gain`` or ``max_size`` is reached.

    With ``params.prune`` set, every addition is followed by removals of
    earlier picks while dropping one raises the penalized score by more than
    ``epsilon_gain`` (ties: lower pool weight, then glyph order). This undoes
    "generalist" segments chosen while few segments were available.

    Returns
    -------
    inventory : Inventory
        Selected segments, id ``"induced"``.
    trace : list of Step
        ``(glyph, gain, action)`` in order; ``gain`` is the exact change of
        the penalized score caused by the step.
    """
    streams = _check_streams(streams)
    if len(pool) == 0:
        raise UsageError("empty candidate pool")
    glyphs = list(pool.entries)              # glyph order == tie-break order
    weight = [pool.entries[g] for g in glyphs]
    segs = [pool.segments[g] for g in glyphs]
    mats = [score_matrix(s, segs, params.decode)[0] for s in streams]
    n_streams = len(streams)

    def penalized_scores(subsets, size):
        fits = np.zeros(len(subsets))
        for m in mats:
            if m.shape[0] < params.decode.min_duration:
                fits += -np.inf
                continue
            dense = np.stack([m[:, idx] for idx in subsets])
            fits += best_path_scores(_prune_dense(dense, params.decode.top_k), params.decode)
        return fits - params.lam * size * n_streams

    selected: list[int] = []
    current = -math.inf
    trace: list[Step] = []
    for _ in range(10 * len(glyphs) * max(params.max_size, 1) + 10):
        if len(selected) >= params.max_size:
            break
        remaining = [j for j in range(len(glyphs)) if j not in selected]
        if not remaining:
            break
        penalized = penalized_scores([sorted(selected + [j]) for j in remaining], len(selected) + 1)
        # same baseline for every candidate: ranking by penalized score ranks by gain
        best = min(range(len(remaining)),
                   key=lambda i: (-penalized[i], -weight[remaining[i]], glyphs[remaining[i]]))
        gain = float(penalized[best] - current)
        if not gain > params.epsilon_gain:
            break
        selected.append(remaining[best])
        trace.append(Step(glyphs[remaining[best]], gain, "add"))
        current = float(penalized[best])
        while params.prune and len(selected) > 2:
            members = selected[:-1]
            penalized = penalized_scores([sorted(x for x in selected if x != j) for j in members],
                                         len(selected) - 1)
            best = min(range(len(members)),
                       key=lambda i: (-penalized[i], weight[members[i]], glyphs[members[i]]))
            gain = float(penalized[best] - current)
            if not gain > params.epsilon_gain:
                break
            selected.remove(members[best])
            trace.append(Step(glyphs[members[best]], gain, "remove"))
            current = float(penalized[best])
    inv = Inventory("induced", "induced", tuple(segs[j] for j in selected))
    return inv, trace


def calibrate_lambda(streams: Sequence[FeatureStream], planted, pool: CandidatePool,
                     decode: DecodeParams = DecodeParams()) -> dict:
    """Interval of per-stream size penalties for which ``planted`` beats its neighbours.

    The planted inventory must outscore every inventory obtained by removing
    one of its segments (upper bound) and by adding one pool segment it lacks
    (lower bound). Returns the bounds and their midpoint; ``valid`` is false
    when the interval is empty.
    """
    streams = _check_streams(streams)
    n = len(streams)
    base = _segments(planted)
    base_glyphs = {s.glyph for s in base}
    zero = InductionParams(lam=0.0, decode=decode)
    fit = score_inventory(streams, base, zero).fit
    removal_gains = {s.glyph: fit - score_inventory(streams, [x for x in base if x is not s], zero).fit
                     for s in base if len(base) > 1}
    addition_gains = {g: score_inventory(streams, list(base) + [pool.segments[g]], zero).fit - fit
                      for g in pool.entries if g not in base_glyphs}
    hi = min(removal_gains.values()) / n if removal_gains else math.inf
    lo = max(0.0, max(addition_gains.values()) / n) if addition_gains else 0.0
    mid = 0.5 * (lo + hi) if math.isfinite(hi) else lo * 2 or 1.0
    return {"lower": lo, "upper": hi, "midpoint": mid, "valid": lo < hi,
            "n_streams": n, "removal_gains": removal_gains, "addition_gains": addition_gains}


def admissibility_filter(hypothesis: Iterable[str], db: TypologyDatabase, min_attestation: int = 1,
                         mode: str = "per_segment",
                         min_containment: float = DEFAULT_MIN_CONTAINMENT):
    """Filter a hypothesized glyph set by typological attestation.

    ``per_segment`` keeps glyphs attested in at least ``min_attestation``
    inventories. ``co_occurrence`` additionally reports the best containment
    of the whole hypothesis in any single attested inventory and marks the
    set inadmissible below ``min_containment``.
    """
    if int(min_attestation) != min_attestation or min_attestation < 1:
        raise UsageError("min_attestation must be an integer >= 1")
    if mode not in ("per_segment", "co_occurrence"):
        raise UsageError(f"unknown admissibility mode {mode!r}")
    hyp = sorted({normalize_glyph(g) for g in hypothesis})
    attest = {g: db.attestation.get(g, 0) for g in hyp}
    kept = frozenset(g for g in hyp if attest[g] >= min_attestation)
    report = {
        "mode": mode,
        "min_attestation": int(min_attestation),
        "attestation": attest,
        "removed": [g for g in hyp if g not in kept],
        "admissible": True,
    }
    if mode == "co_occurrence":
        hset = set(hyp)
        best, best_id = 0.0, None
        if hset:
            for inv in db.inventories.values():
                frac = len(hset & inv.glyphs) / len(hset)
                if frac > best:
                    best, best_id = frac, inv.inventory_id
        else:
            best = 1.0
        report.update(containment=best, best_inventory=best_id, min_containment=min_containment,
                      admissible=best >= min_containment)
    return kept, report


def lookup_segments(db: TypologyDatabase, glyphs: Iterable[str]) -> list[Segment]:
    out = []
    for g in glyphs:
        key = normalize_glyph(g)
        if key not in db.segments:
            raise SegmentNotFound(key)
        out.append(db.segments[key])
    return out
