"""Segment lattices over articulatory-feature posterior streams and exact best-path decoding.

Each frame of a :class:`FeatureStream` carries, per feature, the posterior
probability that the feature is ``+``. A segment scores a frame by the mean
log-likelihood of its specified features; unspecified features are ignored.
Decoding picks one segment per frame maximizing the summed frame scores minus
a penalty per segment change, with an optional minimum run length.
"""

from __future__ import annotations

import io
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InfeasibleError, ParseError, UsageError
from .typology import Inventory, Segment

DEFAULT_FRAME_PERIOD = 0.01
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class DecodeParams:
    switch_penalty: float = 0.0
    top_k: int = 1024
    min_duration: int = 1
    clamp_epsilon: float = 1e-6

    def __post_init__(self):
        if not self.switch_penalty >= 0 or math.isinf(self.switch_penalty):
            raise UsageError(f"switch_penalty must be finite and >= 0, got {self.switch_penalty}")
        if int(self.top_k) != self.top_k or self.top_k < 1:
            raise UsageError(f"top_k must be a positive integer, got {self.top_k}")
        if int(self.min_duration) != self.min_duration or self.min_duration < 1:
            raise UsageError(f"min_duration must be an integer >= 1, got {self.min_duration}")
        if not 0 < self.clamp_epsilon < 0.5:
            raise UsageError(f"clamp_epsilon must be in (0, 0.5), got {self.clamp_epsilon}")


@dataclass(frozen=True)
class FeatureFrame:
    posteriors: np.ndarray


@dataclass(frozen=True, eq=False)
class FeatureStream:
    """Time-ordered per-feature posteriors, shape ``(n_frames, n_features)``."""

    feature_names: tuple[str, ...]
    posteriors: np.ndarray
    frame_period: float = DEFAULT_FRAME_PERIOD

    def __post_init__(self):
        names = tuple(self.feature_names)
        if len(set(names)) != len(names):
            raise UsageError("duplicate feature names in stream")
        post = np.array(self.posteriors, dtype=np.float64)
        if post.size == 0:
            post = np.zeros((post.shape[0] if post.ndim == 2 else 0, len(names)))
        if post.ndim != 2 or post.shape[1] != len(names):
            raise DimensionError(f"posteriors of shape {post.shape} for {len(names)} features")
        if not np.all((post >= 0.0) & (post <= 1.0)):
            raise UsageError("posteriors must lie in [0, 1]")
        if not self.frame_period > 0:
            raise UsageError(f"frame_period must be > 0, got {self.frame_period}")
        post.flags.writeable = False
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "posteriors", post)

    @classmethod
    def from_frames(cls, feature_names, frames: Iterable, frame_period=DEFAULT_FRAME_PERIOD):
        rows = [f.posteriors if isinstance(f, FeatureFrame) else f for f in frames]
        return cls(tuple(feature_names), np.array(rows, dtype=np.float64).reshape(len(rows), -1)
                   if rows else np.zeros((0, len(tuple(feature_names)))), frame_period)

    @property
    def n_frames(self) -> int:
        return self.posteriors.shape[0]

    def __len__(self):
        return self.n_frames

    @property
    def frames(self) -> list[FeatureFrame]:
        return [FeatureFrame(row) for row in self.posteriors]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) * self.frame_period

    def __eq__(self, other):
        if not isinstance(other, FeatureStream):
            return NotImplemented
        return (self.feature_names == other.feature_names
                and self.frame_period == other.frame_period
                and np.array_equal(self.posteriors, other.posteriors))


def resample_tracks(tracks: dict, frame_period: float, duration: float) -> FeatureStream:
    """Put asynchronous per-feature tracks on a common frame grid.

    ``tracks`` maps feature name to ``(times, posteriors)``; values between
    samples are linearly interpolated and held constant past the ends.
    """
    n = int(math.floor(duration / frame_period + 1e-9))
    grid = np.arange(n) * frame_period
    names = tuple(tracks)
    cols = [np.interp(grid, np.asarray(t, float), np.asarray(p, float)) for t, p in tracks.values()]
    post = np.stack(cols, axis=1) if cols else np.zeros((n, 0))
    return FeatureStream(names, np.clip(post, 0.0, 1.0), frame_period)


def _feature_masks(segment: Segment, feature_names: Sequence[str]):
    system = segment.features.system
    signs = segment.features.signs
    pos = [system.index.get(f) for f in feature_names]
    if any(p is None for p in pos):
        missing = [f for f, p in zip(feature_names, pos) if p is None]
        raise UsageError(f"stream features not in the feature system: {missing}")
    s = signs[pos] if pos else np.zeros(0, dtype=np.int8)
    return (s == 1).astype(np.float64), (s == -1).astype(np.float64)


def segment_frame_score(frame, segment: Segment, feature_names: Sequence[str],
                        params: DecodeParams = DecodeParams()) -> float:
    """Mean log-likelihood of ``segment``'s specified features under one frame's posteriors.

    Returns 0.0 for a segment with no specified feature among ``feature_names``
    (see :func:`score_matrix`, which reports such segments as degenerate).
    """
    p = np.asarray(frame.posteriors if isinstance(frame, FeatureFrame) else frame, dtype=np.float64)
    plus, minus = _feature_masks(segment, feature_names)
    n = plus.sum() + minus.sum()
    if n == 0:
        return 0.0
    eps = params.clamp_epsilon
    p = np.clip(p, eps, 1.0 - eps)
    return float((np.log(p) @ plus + np.log(1.0 - p) @ minus) / n)


def score_matrix(stream: FeatureStream, segments: Sequence[Segment],
                 params: DecodeParams = DecodeParams()):
    """Frame-by-segment log scores, shape ``(n_frames, n_segments)``, and a degeneracy mask."""
    eps = params.clamp_epsilon
    p = np.clip(stream.posteriors, eps, 1.0 - eps)
    logp, log1m = np.log(p), np.log(1.0 - p)
    scores = np.zeros((stream.n_frames, len(segments)))
    degenerate = np.zeros(len(segments), dtype=bool)
    # one matrix-vector product per segment: a column never depends on which
    # other segments are scored alongside it
    for j, seg in enumerate(segments):
        plus, minus = _feature_masks(seg, stream.feature_names)
        n = plus.sum() + minus.sum()
        if n == 0:
            degenerate[j] = True
        else:
            scores[:, j] = (logp @ plus + log1m @ minus) / n
    return scores, degenerate


def _candidate_order(candidates: Iterable[Segment]) -> tuple[Segment, ...]:
    uniq = {}
    for seg in candidates:
        uniq.setdefault((seg.glyph, seg.features.tokens()), seg)
    return tuple(uniq[k] for k in sorted(uniq))


@dataclass(frozen=True, eq=False)
class SegmentLattice:
    """Per-frame pruned segment hypotheses.

    ``arcs[t]`` is a tuple of ``(candidate index, log score)`` sorted by
    descending score, ties in candidate (glyph) order. Candidates are sorted
    by glyph, so index order is the deterministic tie-break order.
    """

    candidates: tuple[Segment, ...]
    arcs: tuple[tuple[tuple[int, float], ...], ...]
    degenerate: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        n = len(self.candidates)
        norm = []
        for t, frame_arcs in enumerate(self.arcs):
            ids = [int(i) for i, _ in frame_arcs]
            scores = [float(s) for _, s in frame_arcs]
            if any(i < 0 or i >= n for i in ids):
                raise UsageError(f"frame {t}: arc refers to a missing candidate")
            if len(set(ids)) != len(ids):
                raise UsageError(f"frame {t}: duplicate arcs for one candidate")
            if not all(math.isfinite(s) for s in scores):
                raise UsageError(f"frame {t}: non-finite arc score")
            order = sorted(range(len(ids)), key=lambda j: (-scores[j], ids[j]))
            norm.append(tuple((ids[j], scores[j]) for j in order))
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "arcs", tuple(norm))
        object.__setattr__(self, "degenerate", frozenset(self.degenerate))

    @property
    def n_frames(self) -> int:
        return len(self.arcs)

    def dense(self) -> np.ndarray:
        """Scores as a ``(n_frames, n_candidates)`` array, ``-inf`` where no arc exists."""
        out = np.full((self.n_frames, len(self.candidates)), -np.inf)
        for t, frame_arcs in enumerate(self.arcs):
            for i, s in frame_arcs:
                out[t, i] = s
        return out

    @classmethod
    def from_scores(cls, candidates: Sequence[Segment], scores: np.ndarray, top_k: int,
                    degenerate=()) -> "SegmentLattice":
        scores = np.asarray(scores, dtype=np.float64)
        k = min(int(top_k), scores.shape[1]) if scores.ndim == 2 else 0
        arcs = []
        for row in scores:
            # stable sort on -score keeps candidate (glyph) order among ties
            order = np.argsort(-row, kind="stable")[:k]
            arcs.append(tuple((int(i), float(row[i])) for i in order))
        return cls(tuple(candidates), tuple(arcs), frozenset(degenerate))


def build_lattice(stream: FeatureStream, candidates: Iterable[Segment],
                  params: DecodeParams = DecodeParams()) -> SegmentLattice:
    """Score every candidate on every frame and keep the ``top_k`` best per frame."""
    cands = _candidate_order(candidates)
    if not cands:
        raise UsageError("empty candidate set")
    scores, degenerate = score_matrix(stream, cands, params)
    return SegmentLattice.from_scores(
        cands, scores, params.top_k, {c.glyph for c, d in zip(cands, degenerate) if d})


@dataclass(frozen=True)
class Alignment:
    """Decoded runs ``(segment, start_frame, end_frame)`` with inclusive ends."""

    runs: tuple[tuple[Segment, int, int], ...]
    total_log_score: float

    @property
    def n_frames(self) -> int:
        return self.runs[-1][2] + 1 if self.runs else 0

    def labels(self) -> list[str]:
        return [seg.glyph for seg, a, b in self.runs for _ in range(a, b + 1)]

    def segments(self) -> set[Segment]:
        return {seg for seg, _, _ in self.runs}

    def to_dict(self) -> dict:
        return {
            "n_frames": self.n_frames,
            "total_log_score": self.total_log_score,
            "runs": [{"glyph": s.glyph, "start": a, "end": b} for s, a, b in self.runs],
        }


def runs_from_labels(labels: Sequence[int]) -> list[tuple[int, int, int]]:
    runs = []
    for t, lab in enumerate(labels):
        if runs and runs[-1][0] == lab:
            runs[-1][2] = t
        else:
            runs.append([lab, t, t])
    return [tuple(r) for r in runs]


def _exclusive_max(values: np.ndarray) -> np.ndarray:
    """For each position ``s`` on the last axis, the max over all other positions."""
    n = values.shape[-1]
    if n == 1:
        return np.full_like(values, -np.inf)
    a1 = values.argmax(axis=-1)[..., None]
    m1 = np.take_along_axis(values, a1, axis=-1)
    rest = values.copy()
    np.put_along_axis(rest, a1, -np.inf, axis=-1)
    m2 = rest.max(axis=-1, keepdims=True)
    return np.where(np.arange(n) == a1, m2, m1)


def _backward(dense: np.ndarray, penalty: float, min_duration: int, keep: bool):
    """Best suffix scores over states (segment, run length so far capped at ``min_duration``).

    ``dense`` has shape ``(..., T, S)``. Returns the per-frame tables
    ``(..., S, d)`` when ``keep`` is set, else only the table for frame 0.
    """
    d = min_duration
    T = dense.shape[-2]
    stay_idx = np.minimum(np.arange(d) + 1, d - 1)
    beta = np.full(dense.shape[:-2] + (dense.shape[-1], d), -np.inf)
    beta[..., d - 1] = dense[..., T - 1, :]
    tables = [beta] if keep else None
    for t in range(T - 2, -1, -1):
        cont = beta[..., stay_idx]
        switch = _exclusive_max(beta[..., 0] - penalty)
        cont[..., d - 1] = np.maximum(cont[..., d - 1], switch)
        beta = dense[..., t, :, None] + cont
        if keep:
            tables.append(beta)
    if keep:
        tables.reverse()
        return tables
    return beta


def best_path_scores(dense: np.ndarray, params: DecodeParams) -> np.ndarray:
    """Best-path totals for a batch of dense score arrays of shape ``(..., T, S)``.

    Uses the same recursion as :func:`decode_best_path`, so totals agree bitwise.
    """
    if dense.shape[-2] < params.min_duration:
        raise InfeasibleError(f"min_duration {params.min_duration} exceeds {dense.shape[-2]} frames")
    beta0 = _backward(dense, float(params.switch_penalty), int(params.min_duration), keep=False)
    return beta0[..., 0].max(axis=-1)


def decode_best_path(lattice: SegmentLattice, params: DecodeParams = DecodeParams()) -> Alignment:
    """Exact best labeling of the lattice by dynamic programming.

    Among equally scoring labelings the one whose glyph-index sequence is
    lexicographically smallest (from frame 0) is returned.
    """
    T = lattice.n_frames
    d = int(params.min_duration)
    pen = float(params.switch_penalty)
    for t, frame_arcs in enumerate(lattice.arcs):
        if not frame_arcs:
            raise InfeasibleError(f"frame {t} has no arcs")
    if d > T:
        raise InfeasibleError(f"min_duration {d} exceeds {T} frames")
    dense = lattice.dense()
    tables = _backward(dense, pen, d, keep=True)
    start = tables[0][:, 0]
    best = start.max()
    if not np.isfinite(best):
        raise InfeasibleError("no labeling satisfies min_duration over the lattice arcs")
    # equal-score labelings can differ in the last bits depending on the
    # summation order; treat those as ties so the glyph-order rule decides
    tol = TIE_RTOL * max(1.0, abs(float(best)))
    s = int(np.flatnonzero(start >= best - tol)[0])
    c = 0
    labels = [s]
    for t in range(T - 1):
        nxt = tables[t + 1]
        options = {s: nxt[s, min(c + 1, d - 1)]}
        if c == d - 1:
            entering = nxt[:, 0] - pen
            for s2 in range(len(lattice.candidates)):
                if s2 != s:
                    options[s2] = max(options.get(s2, -np.inf), entering[s2])
        top = max(options.values())
        s_next = min(k for k, v in options.items() if v >= top - tol)
        c = min(c + 1, d - 1) if s_next == s else 0
        s = s_next
        labels.append(s)
    runs = tuple((lattice.candidates[i], a, b) for i, a, b in runs_from_labels(labels))
    return Alignment(runs, float(best))


def alignment_score(lattice: SegmentLattice, alignment: Alignment, params: DecodeParams) -> float:
    """Recompute an alignment's total from lattice arcs and switch penalties."""
    index = {id(c): i for i, c in enumerate(lattice.candidates)}
    arc_maps = [dict(a) for a in lattice.arcs]
    total = 0.0
    for seg, a, b in alignment.runs:
        i = index.get(id(seg))
        if i is None:
            i = next(j for j, c in enumerate(lattice.candidates) if c == seg)
        for t in range(a, b + 1):
            if i not in arc_maps[t]:
                raise InfeasibleError(f"alignment uses a pruned arc at frame {t}")
            total += arc_maps[t][i]
    return total - params.switch_penalty * max(len(alignment.runs) - 1, 0)


def _segments_of(inventory) -> tuple[Segment, ...]:
    if isinstance(inventory, Inventory):
        return inventory.segments
    return tuple(inventory)


def constrained_decode(stream: FeatureStream, inventory, params: DecodeParams = DecodeParams()) -> Alignment:
    """Best alignment of ``stream`` using only the segments of ``inventory``."""
    return decode_best_path(build_lattice(stream, _segments_of(inventory), params), params)


def generate_stream(inventory, n_frames: int, mean_run_length: float = 5.0,
                    mu_plus: float = 0.9, mu_minus: float = 0.1, noise_sigma: float = 0.1,
                    seed: int = 0, feature_names: Sequence[str] | None = None,
                    frame_period: float = DEFAULT_FRAME_PERIOD,
                    params: DecodeParams = DecodeParams()):
    """Sample a synthetic posterior stream and its true alignment from an inventory.

    Runs have geometric lengths (mean ``mean_run_length``, minimum 1) and
    consecutive runs use different segments when the inventory allows it.
    Plus-specified features emit ``mu_plus``, minus-specified ``mu_minus``,
    unspecified 0.5, each with Gaussian noise and clipped to [0, 1]. The true
    alignment's score is computed on the generated stream with ``params``.
    """
    segs = _candidate_order(_segments_of(inventory))
    if not segs:
        raise UsageError("cannot generate a stream from an empty inventory")
    if not (0 < mu_plus < 1 and 0 < mu_minus < 1):
        raise UsageError("mu_plus and mu_minus must lie in (0, 1)")
    if mean_run_length < 1:
        raise UsageError("mean_run_length must be >= 1")
    if noise_sigma < 0 or n_frames < 0:
        raise UsageError("noise_sigma and n_frames must be >= 0")
    names = tuple(feature_names) if feature_names is not None \
        else segs[0].features.system.feature_names
    rng = np.random.default_rng(seed)

    labels: list[int] = []
    current = int(rng.integers(len(segs)))
    while len(labels) < n_frames:
        length = int(rng.geometric(1.0 / mean_run_length))
        labels.extend([current] * length)
        if len(segs) > 1:
            nxt = int(rng.integers(len(segs) - 1))
            current = nxt + (nxt >= current)
    labels = labels[:n_frames]

    signs = np.stack([_feature_masks(s, names)[0] - _feature_masks(s, names)[1] for s in segs])
    means = np.where(signs > 0, mu_plus, np.where(signs < 0, mu_minus, 0.5))
    base = means[labels] if labels else np.zeros((0, len(names)))
    noise = rng.normal(0.0, noise_sigma, size=base.shape) if noise_sigma > 0 else 0.0
    stream = FeatureStream(names, np.clip(base + noise, 0.0, 1.0), frame_period)

    if not labels:
        return stream, Alignment((), 0.0)
    scores, _ = score_matrix(stream, segs, params)
    truth_runs = runs_from_labels(labels)
    total = float(scores[np.arange(n_frames), labels].sum()) - params.switch_penalty * (len(truth_runs) - 1)
    return stream, Alignment(tuple((segs[i], a, b) for i, a, b in truth_runs), total)


def write_stream(stream: FeatureStream, fh) -> None:
    """TSV: header ``time<TAB>feature...``, one row per frame, shortest round-trip decimals."""
    fh.write("\t".join(("time",) + stream.feature_names) + "\n")
    for t, row in enumerate(stream.posteriors):
        fh.write("\t".join([repr(t * stream.frame_period)] + [repr(float(v)) for v in row]) + "\n")


def dumps_stream(stream: FeatureStream) -> str:
    buf = io.StringIO()
    write_stream(stream, buf)
    return buf.getvalue()


def read_stream(fh, frame_period: float | None = None) -> FeatureStream:
    """Inverse of :func:`write_stream`; the frame period is inferred from the time column."""
    lines = [ln.rstrip("\r\n") for ln in fh if ln.strip()]
    if not lines:
        raise ParseError("empty stream file")
    header = lines[0].split("\t")
    if header[0] != "time":
        raise ParseError("stream header must start with 'time'")
    names = tuple(header[1:])
    times, rows = [], []
    for lineno, line in enumerate(lines[1:], 2):
        parts = line.split("\t")
        if len(parts) != len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} fields, got {len(parts)}")
        try:
            vals = [float(x) for x in parts]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError(f"line {lineno}: non-finite value")
        times.append(vals[0])
        rows.append(vals[1:])
    if frame_period is None:
        frame_period = times[1] - times[0] if len(times) > 1 else DEFAULT_FRAME_PERIOD
        if frame_period <= 0:
            raise ParseError("stream times must increase")
        expected = np.arange(len(times)) * frame_period
        if not np.allclose(times, expected + times[0], rtol=0, atol=1e-6 * max(1.0, frame_period)):
            raise ParseError("stream frames are not on a uniform grid; resample first")
    post = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    if not np.all((post >= 0) & (post <= 1)):
        raise ParseError("posteriors must lie in [0, 1]")
    return FeatureStream(names, post, frame_period)


def loads_stream(text: str, frame_period: float | None = None) -> FeatureStream:
    return read_stream(io.StringIO(text), frame_period)


def alignment_json(alignment: Alignment) -> str:
    return json.dumps(alignment.to_dict(), ensure_ascii=False, indent=2)
