"""Cross-lingual predictability of binary distinctive-feature contrasts.

A contrast is one feature (the target) restricted to a scope of segments,
e.g. ``back`` among ``syllabic +`` segments. Each eligible segment of each
language becomes an instance labelled by the target value; a logistic
classifier trained on some languages is evaluated on held-out ones.

Two input modes exist. ``symbolic`` uses the ternary feature vector itself
(minus the target). ``synthetic`` replaces speech with a seeded realization
model: a fixed random projection of the feature vector, optional per-family
sign flips and offsets, and Gaussian noise.
"""

from __future__ import annotations

import hashlib
import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from types import MappingProxyType

import numpy as np

from .errors import DegenerateDataError, EmptyDatasetError, UsageError
from .typology import (SEGMENT_CLASSES, Segment, Ternary, TypologyDatabase, as_ternary,
                       inventories_for_language, segment_matches)


def _as_scope(scope) -> tuple[tuple[str, Ternary], ...]:
    if isinstance(scope, Mapping):
        scope = scope.items()
    return tuple((str(name), as_ternary(value)) for name, value in scope)


@dataclass(frozen=True)
class ContrastSpec:
    """One target feature restricted to segments matching ``scope``.

    ``context_features`` are the inputs of ungrounded symbolic mode; ``None``
    means segment-class indicators only.
    """

    target_feature: str
    scope: tuple[tuple[str, Ternary], ...] = ()
    grounded: bool = False
    context_features: tuple[str, ...] | None = None

    def __post_init__(self):
        scope = _as_scope(self.scope)
        object.__setattr__(self, "scope", scope)
        if self.context_features is not None:
            object.__setattr__(self, "context_features", tuple(self.context_features))
        if self.target_feature in {name for name, _ in scope}:
            raise UsageError(f"target feature {self.target_feature!r} also constrains the scope")
        if self.context_features and self.target_feature in self.context_features:
            raise UsageError("target feature cannot be a context feature")

    @classmethod
    def from_dict(cls, d: Mapping) -> "ContrastSpec":
        known = {"target_feature", "scope", "grounded", "context_features"}
        unknown = set(d) - known
        if unknown:
            raise UsageError(f"unknown contrast fields: {sorted(unknown)}")
        if "target_feature" not in d:
            raise UsageError("contrast needs a target_feature")
        return cls(d["target_feature"], d.get("scope", ()), bool(d.get("grounded", False)),
                   d.get("context_features"))

    def to_dict(self) -> dict:
        return {"target_feature": self.target_feature,
                "scope": {name: v.value for name, v in self.scope},
                "grounded": self.grounded,
                "context_features": list(self.context_features)
                if self.context_features is not None else None}


@dataclass(frozen=True)
class FamilyShift:
    flip: tuple[str, ...] = ()
    offset_scale: float = 0.0


@dataclass(frozen=True)
class RealizationParams:
    dim: int = 16
    noise_sigma: float = 0.1
    family_shift: Mapping[str, FamilyShift] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise UsageError(f"dim must be a positive integer, got {self.dim}")
        if not self.noise_sigma >= 0:
            raise UsageError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise UsageError("seed must be a 64-bit unsigned integer")
        shifts = {}
        for fam, sh in dict(self.family_shift).items():
            if isinstance(sh, Mapping):
                sh = FamilyShift(tuple(sh.get("flip", ())), float(sh.get("offset_scale", 0.0)))
            shifts[fam] = sh
        object.__setattr__(self, "family_shift", MappingProxyType(shifts))

    @classmethod
    def from_dict(cls, d: Mapping) -> "RealizationParams":
        return cls(int(d.get("dim", 16)), float(d.get("noise_sigma", 0.1)),
                   d.get("family_shift", {}), int(d.get("seed", 0)))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "noise_sigma": self.noise_sigma, "seed": self.seed,
                "family_shift": {f: {"flip": list(s.flip), "offset_scale": s.offset_scale}
                                 for f, s in sorted(self.family_shift.items())}}


@dataclass(frozen=True)
class Hyper:
    learning_rate: float = 0.5
    epochs: int = 500
    l2: float = 0.0

    @classmethod
    def from_dict(cls, d: Mapping) -> "Hyper":
        return cls(float(d.get("learning_rate", 0.5)), int(d.get("epochs", 500)), float(d.get("l2", 0.0)))


@dataclass(frozen=True, eq=False)
class Instance:
    input: np.ndarray
    label: int
    language: str
    glyph: str
    draw: int = 0


@dataclass(frozen=True, eq=False)
class Classifier:
    weights: np.ndarray
    bias: float
    epochs: int
    final_loss: float

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision(X))

    def predict(self, X) -> np.ndarray:
        # threshold 0.5 on the probability, i.e. 0 on the decision value
        return (self.decision(X) >= 0.0).astype(int)

    def accuracy(self, data: Sequence[Instance]) -> float:
        X, y = _design(data)
        return float(np.mean(self.predict(X) == y))


@dataclass
class ConsistencyReport:
    per_language: dict[str, dict]
    macro_accuracy: float
    mode: str
    grounded: bool
    target_feature: str = ""
    train_languages: list[str] = field(default_factory=list)
    test_languages: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    train_accuracy: float | None = None

    def to_dict(self) -> dict:
        return {
            "target_feature": self.target_feature,
            "mode": self.mode,
            "grounded": self.grounded,
            "train_languages": list(self.train_languages),
            "test_languages": list(self.test_languages),
            "per_language": {k: dict(v) for k, v in self.per_language.items()},
            "macro_accuracy": self.macro_accuracy,
            "train_accuracy": self.train_accuracy,
            "skipped": list(self.skipped),
        }


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


@lru_cache(maxsize=64)
def _projection(seed: int, dim: int, n_features: int) -> np.ndarray:
    rng = np.random.default_rng([int(seed), 0x70726F6A, dim, n_features])
    P = rng.normal(size=(dim, n_features)) / math.sqrt(max(n_features, 1))
    P.flags.writeable = False
    return P


@lru_cache(maxsize=256)
def _family_offset(seed: int, family: str, dim: int) -> np.ndarray:
    rng = np.random.default_rng([int(seed), 0x6F6666, _stable_hash(family), dim])
    v = rng.normal(size=dim)
    v /= np.linalg.norm(v)
    v.flags.writeable = False
    return v


def synth_realization(segment: Segment, family: str, realization: RealizationParams,
                      draw_index: int = 0) -> np.ndarray:
    """Deterministic synthetic "acoustic" vector for one segment token.

    projection(signs with the family's flipped features negated)
    + offset_scale * family direction + noise keyed by (seed, glyph, family, draw_index).
    """
    system = segment.features.system
    signs = segment.features.signs.astype(np.float64)
    shift = realization.family_shift.get(family)
    if shift is not None and shift.flip:
        signs = signs.copy()
        for name in shift.flip:
            signs[system.position(name)] *= -1.0
    out = _projection(realization.seed, realization.dim, len(system)) @ signs
    if shift is not None and shift.offset_scale:
        out = out + shift.offset_scale * _family_offset(realization.seed, family, realization.dim)
    if realization.noise_sigma > 0:
        rng = np.random.default_rng([int(realization.seed), _stable_hash(segment.glyph),
                                     _stable_hash(family), int(draw_index)])
        out = out + realization.noise_sigma * rng.normal(size=realization.dim)
    return out


def _symbolic_names(db: TypologyDatabase, contrast: ContrastSpec) -> list[str]:
    names = db.feature_system.feature_names
    if contrast.target_feature not in db.feature_system:
        raise UsageError(f"unknown target feature {contrast.target_feature!r}")
    if contrast.grounded:
        return [n for n in names if n != contrast.target_feature]
    if contrast.context_features is None:
        return [f"class={c}" for c in SEGMENT_CLASSES]
    for n in contrast.context_features:
        db.feature_system.position(n)
    return list(contrast.context_features)


def input_feature_names(db: TypologyDatabase, contrast: ContrastSpec, mode: str = "symbolic",
                        realization: RealizationParams | None = None) -> list[str]:
    """Column names of instance inputs for a dataset built with these settings."""
    if mode == "symbolic":
        return _symbolic_names(db, contrast)
    if mode == "synthetic":
        if realization is None:
            raise UsageError("synthetic mode requires realization parameters")
        emb = [f"emb{i}" for i in range(realization.dim)]
        return emb + (_symbolic_names(db, contrast) if contrast.grounded else [])
    raise UsageError(f"unknown mode {mode!r}")


def _symbolic_input(segment: Segment, names: Sequence[str]) -> np.ndarray:
    if names and names[0].startswith("class="):
        return np.array([1.0 if segment.segment_class == c else 0.0 for c in SEGMENT_CLASSES])
    system = segment.features.system
    return segment.features.signs[[system.index[n] for n in names]].astype(np.float64)


def language_segments(db: TypologyDatabase, language: str) -> list[Segment]:
    """Union of a language's inventories, one segment per glyph, sorted by glyph."""
    invs = inventories_for_language(db, language)
    if not invs:
        raise UsageError(f"no inventories for language {language!r}")
    segs: dict[str, Segment] = {}
    for inv in invs:
        for s in inv.segments:
            segs.setdefault(s.glyph, s)
    return [segs[g] for g in sorted(segs)]


def language_family(db: TypologyDatabase, language: str, families: Mapping[str, str] | None = None) -> str:
    if families and language in families:
        return families[language]
    for inv in inventories_for_language(db, language):
        if inv.family:
            return inv.family
    return ""


def build_contrast_dataset(db: TypologyDatabase, contrast: ContrastSpec, languages: Sequence[str],
                           mode: str = "symbolic", realization: RealizationParams | None = None,
                           repeats: int = 1, families: Mapping[str, str] | None = None) -> list[Instance]:
    """Instances for every eligible segment of every language, ``repeats`` times each.

    Eligible segments match the scope and have a specified target value;
    the label is 1 when the target is ``+``. Synthetic draws are numbered per
    (language, repeat) so that languages get independent noise.
    """
    if mode == "synthetic" and realization is None:
        raise UsageError("synthetic mode requires realization parameters")
    if mode not in ("symbolic", "synthetic"):
        raise UsageError(f"unknown mode {mode!r}")
    if int(repeats) != repeats or repeats < 1:
        raise UsageError("repeats must be a positive integer")
    names = _symbolic_names(db, contrast)
    target = db.feature_system.position(contrast.target_feature)
    data = []
    for lang in languages:
        family = language_family(db, lang, families)
        for seg in language_segments(db, lang):
            value = seg.features.values[target].value
            if value is Ternary.UNSPECIFIED or not segment_matches(seg, contrast.scope):
                continue
            sym = _symbolic_input(seg, names) if (mode == "symbolic" or contrast.grounded) else None
            for r in range(int(repeats)):
                draw = ((_stable_hash(lang) & 0xFFFFFFFF) << 16) + r
                if mode == "symbolic":
                    x = sym
                else:
                    x = synth_realization(seg, family, realization, draw)
                    if contrast.grounded:
                        x = np.concatenate([x, sym])
                data.append(Instance(np.asarray(x, dtype=np.float64), int(value is Ternary.PLUS),
                                     lang, seg.glyph, draw))
    if not data:
        scope = ", ".join(f"{n}={v.value}" for n, v in contrast.scope) or "(all segments)"
        raise EmptyDatasetError(f"no eligible segments for {contrast.target_feature} in scope {scope} "
                                f"over languages {list(languages)}")
    return data


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def _design(data: Sequence[Instance]):
    X = np.stack([inst.input for inst in data]).astype(np.float64)
    y = np.array([inst.label for inst in data], dtype=np.float64)
    return X, y


def logistic_loss_and_grad(weights, bias, X, y, l2: float = 0.0):
    """Mean log-loss plus ``l2/2 * |w|^2`` and its gradient with respect to (w, b)."""
    w = np.asarray(weights, dtype=np.float64)
    z = X @ w + bias
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
    r = _sigmoid(z) - y
    grad_w = X.T @ r / len(y) + l2 * w
    grad_b = float(np.mean(r))
    return loss, grad_w, grad_b


def _canonical_order(data: Sequence[Instance]) -> list[Instance]:
    return sorted(data, key=lambda i: (i.language, i.glyph, i.draw, i.label, i.input.tobytes()))


def train_classifier(data: Sequence[Instance], hyper: Hyper = Hyper()) -> Classifier:
    """Logistic regression by full-batch gradient descent from zero weights.

    Instances are put in a canonical order first, so the result does not
    depend on the order they arrive in.
    """
    if not data:
        raise DegenerateDataError("no training data")
    X, y = _design(_canonical_order(data))
    if y.min() == y.max():
        raise DegenerateDataError(f"training data has a single class ({int(y[0])})")
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(int(hyper.epochs)):
        _, gw, gb = logistic_loss_and_grad(w, b, X, y, hyper.l2)
        w = w - hyper.learning_rate * gw
        b = b - hyper.learning_rate * gb
    loss, _, _ = logistic_loss_and_grad(w, b, X, y, hyper.l2)
    return Classifier(w, float(b), int(hyper.epochs), loss)


def _language_stats(clf: Classifier, data: Sequence[Instance]) -> dict:
    X, y = _design(data)
    return {"n_pos": int(y.sum()), "n_neg": int(len(y) - y.sum()),
            "accuracy": float(np.mean(clf.predict(X) == y))}


def evaluate_heldout(db: TypologyDatabase, contrast: ContrastSpec, train_languages: Sequence[str],
                     test_languages: Sequence[str], mode: str = "symbolic",
                     realization: RealizationParams | None = None, hyper: Hyper = Hyper(),
                     repeats: int = 1, families: Mapping[str, str] | None = None) -> ConsistencyReport:
    """Train on ``train_languages`` only and report accuracy on each test language.

    Test languages without eligible segments are listed in ``skipped``.
    """
    train_keys = {l.casefold() for l in train_languages}
    overlap = sorted(l for l in test_languages if l.casefold() in train_keys)
    if overlap:
        raise UsageError(f"languages both trained and tested on: {overlap}")
    if not train_languages or not test_languages:
        raise UsageError("need at least one training and one test language")
    train = build_contrast_dataset(db, contrast, train_languages, mode, realization, repeats, families)
    clf = train_classifier(train, hyper)
    per_language, skipped = {}, []
    for lang in test_languages:
        try:
            test = build_contrast_dataset(db, contrast, [lang], mode, realization, repeats, families)
        except EmptyDatasetError:
            skipped.append(lang)
            continue
        per_language[lang] = _language_stats(clf, test)
    if not per_language:
        raise EmptyDatasetError(f"no test language has eligible segments: {list(test_languages)}")
    macro = float(np.mean([v["accuracy"] for v in per_language.values()]))
    return ConsistencyReport(per_language, macro, mode, contrast.grounded, contrast.target_feature,
                             list(train_languages), list(test_languages), skipped,
                             clf.accuracy(train))


def leave_one_language_out(db: TypologyDatabase, contrast: ContrastSpec, languages: Sequence[str],
                           mode: str = "symbolic", realization: RealizationParams | None = None,
                           hyper: Hyper = Hyper(), repeats: int = 1,
                           families: Mapping[str, str] | None = None,
                           max_workers: int | None = None) -> list[ConsistencyReport]:
    """One :func:`evaluate_heldout` fold per language, in input order."""
    languages = list(languages)
    if len(languages) < 2:
        raise UsageError("leave-one-language-out needs at least two languages")

    def fold(held):
        rest = [l for l in languages if l != held]
        return evaluate_heldout(db, contrast, rest, [held], mode, realization, hyper, repeats, families)

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as ex:
            return list(ex.map(fold, languages))
    return [fold(l) for l in languages]


def pooled_accuracy(reports: Sequence[ConsistencyReport]) -> float:
    """Unweighted mean of the held-out accuracies over a set of folds."""
    accs = [v["accuracy"] for r in reports for v in r.per_language.values()]
    return float(np.mean(accs))
