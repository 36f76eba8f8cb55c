"""Immutable in-memory store for PHOIBLE-style phoneme inventory databases.

A database is parsed from "long format" delimited text: one row per
(inventory, segment) pair, a handful of metadata columns and one column per
distinctive feature holding ``+``, ``-``, ``0`` or a contour such as ``+,-``.

>>> import io
>>> rows = "InventoryID,LanguageName,Phoneme,SegmentClass,voice\\n1,Test,b,consonant,+\\n"
>>> db = parse_phoible(io.BytesIO(rows.encode()))
>>> feature_vector(db, "b")["voice"].value
<Ternary.PLUS: '+'>
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import gzip
import io
import json
import logging
import pickle
import re
import unicodedata
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import BinaryIO

import numpy as np

from . import __version__
from .errors import ConflictError, DimensionError, ParseError, SegmentNotFound, UsageError

logger = logging.getLogger(__name__)

GLYPH_NORMALIZATION = "NFD"
CONTOUR_SEPARATOR = ","
MISSING_TOKENS = frozenset({"", "NA"})
SEGMENT_CLASSES = ("consonant", "vowel", "tone", "unknown")


def normalize_glyph(glyph: str) -> str:
    """Canonical form used for every glyph on ingest and lookup."""
    return unicodedata.normalize(GLYPH_NORMALIZATION, glyph.strip())


def natural_key(text: str):
    """Sort key placing numeric ids in numeric order before other strings."""
    return tuple((0, int(part), "") if part.isdigit() else (1, 0, part)
                 for part in re.findall(r"\d+|\D+", text)) or ((1, 0, ""),)


class Ternary(str, enum.Enum):
    PLUS = "+"
    MINUS = "-"
    UNSPECIFIED = "0"

    @property
    def sign(self) -> int:
        return {"+": 1, "-": -1, "0": 0}[self.value]


_TERNARY_ALIASES = {
    "+": Ternary.PLUS, "plus": Ternary.PLUS, "1": Ternary.PLUS, "true": Ternary.PLUS,
    "-": Ternary.MINUS, "minus": Ternary.MINUS, "-1": Ternary.MINUS, "false": Ternary.MINUS,
    "0": Ternary.UNSPECIFIED, "unspecified": Ternary.UNSPECIFIED,
}


def as_ternary(value) -> Ternary:
    """Coerce a user-facing value (``"+"``, ``"plus"``, ``TernaryValue``...) to :class:`Ternary`."""
    if isinstance(value, TernaryValue):
        return value.value
    if isinstance(value, Ternary):
        return value
    if isinstance(value, bool):
        return Ternary.PLUS if value else Ternary.MINUS
    key = str(value).strip().lower()
    try:
        return _TERNARY_ALIASES[key]
    except KeyError:
        raise UsageError(f"not a ternary feature value: {value!r}") from None


@dataclass(frozen=True)
class TernaryValue:
    value: Ternary
    raw_token: str

    @classmethod
    def parse(cls, token: str, contour_policy: str = "first") -> "TernaryValue":
        raw = token
        token = token.strip()
        if token in MISSING_TOKENS:
            return cls(Ternary.UNSPECIFIED, raw)
        if CONTOUR_SEPARATOR in token:
            parts = [p.strip() for p in token.split(CONTOUR_SEPARATOR)]
            if any(p not in ("+", "-", "0") for p in parts):
                raise ParseError(f"bad contour feature token {raw!r}")
            if contour_policy == "first":
                return cls(Ternary(parts[0]), raw)
            if contour_policy == "unspecified":
                return cls(Ternary.UNSPECIFIED, raw)
            raise UsageError(f"unknown contour policy {contour_policy!r}")
        if token not in ("+", "-", "0"):
            raise ParseError(f"bad feature token {raw!r}")
        return cls(Ternary(token), raw)

    @property
    def is_contour(self) -> bool:
        return CONTOUR_SEPARATOR in self.raw_token

    def __str__(self):
        return self.raw_token


@dataclass(frozen=True)
class FeatureSystem:
    feature_names: tuple[str, ...]
    index: Mapping[str, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        names = tuple(self.feature_names)
        object.__setattr__(self, "feature_names", names)
        if any(not n for n in names):
            raise ParseError("empty feature name")
        if len(set(names)) != len(names):
            dup = [n for n, c in Counter(names).items() if c > 1]
            raise ParseError(f"duplicate feature names: {dup}")
        object.__setattr__(self, "index", MappingProxyType({n: i for i, n in enumerate(names)}))

    def __reduce__(self):
        return (FeatureSystem, (self.feature_names,))

    def __len__(self):
        return len(self.feature_names)

    def __iter__(self):
        return iter(self.feature_names)

    def __contains__(self, name):
        return name in self.index

    def position(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise UsageError(f"unknown feature {name!r}") from None


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[TernaryValue, ...]
    system: FeatureSystem = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.values) != len(self.system):
            raise DimensionError(
                f"vector of length {len(self.values)} for a system of {len(self.system)} features")

    def __reduce__(self):
        return (FeatureVector, (self.values, self.system))

    def __len__(self):
        return len(self.values)

    def __getitem__(self, name: str) -> TernaryValue:
        return self.values[self.system.position(name)]

    @cached_property
    def signs(self) -> np.ndarray:
        """Read-only int8 array encoding plus/minus/unspecified as +1/-1/0."""
        arr = np.array([v.value.sign for v in self.values], dtype=np.int8)
        arr.flags.writeable = False
        return arr

    def tokens(self) -> tuple[str, ...]:
        return tuple(v.raw_token for v in self.values)

    def as_dict(self) -> dict[str, str]:
        return {n: v.value.value for n, v in zip(self.system.feature_names, self.values)}


@dataclass(frozen=True)
class Segment:
    glyph: str
    segment_class: str
    features: FeatureVector = field(repr=False)

    def __post_init__(self):
        glyph = normalize_glyph(self.glyph)
        if not glyph:
            raise ParseError("empty glyph")
        object.__setattr__(self, "glyph", glyph)
        cls = (self.segment_class or "").strip().lower()
        object.__setattr__(self, "segment_class", cls if cls in SEGMENT_CLASSES else "unknown")


@dataclass(frozen=True)
class Inventory:
    inventory_id: str
    language_name: str
    segments: tuple[Segment, ...] = field(repr=False)
    language_code: str = ""
    glottocode: str = ""
    source: str = ""
    family: str = ""
    # opaque per-glyph columns (allophones, marginal flags); never interpreted
    annotations: Mapping[str, Mapping[str, str]] = field(
        default_factory=dict, repr=False, hash=False)

    def __post_init__(self):
        segs = tuple(sorted(self.segments, key=lambda s: s.glyph))
        if not segs:
            raise ParseError(f"inventory {self.inventory_id!r} has no segments")
        glyphs = [s.glyph for s in segs]
        if len(set(glyphs)) != len(glyphs):
            raise ParseError(f"inventory {self.inventory_id!r} repeats a glyph")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "annotations", MappingProxyType(
            {g: MappingProxyType(dict(a)) for g, a in dict(self.annotations).items()}))

    def __reduce__(self):
        notes = {g: dict(a) for g, a in self.annotations.items()}
        return (_rebuild_inventory, (self.inventory_id, self.language_name, self.segments,
                                     self.language_code, self.glottocode, self.source,
                                     self.family, notes))

    @cached_property
    def glyphs(self) -> frozenset[str]:
        return frozenset(s.glyph for s in self.segments)

    def __len__(self):
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def __contains__(self, glyph):
        return normalize_glyph(glyph) in self.glyphs

    def segment(self, glyph: str) -> Segment:
        g = normalize_glyph(glyph)
        for s in self.segments:
            if s.glyph == g:
                return s
        raise SegmentNotFound(g)


def _rebuild_inventory(*args):
    return Inventory(*args)


class LanguageIndex(Mapping):
    """Read-only mapping from language name to inventory ids; keys match case-insensitively."""

    def __init__(self, entries: Mapping[str, tuple[str, ...]]):
        self._display = {}
        self._ids = {}
        for name, ids in entries.items():
            key = name.casefold()
            self._display.setdefault(key, name)
            self._ids[key] = tuple(ids)

    def __getitem__(self, name):
        return self._ids[str(name).casefold()]

    def __iter__(self):
        return iter(self._display[k] for k in self._ids)

    def __len__(self):
        return len(self._ids)

    def __contains__(self, name):
        return isinstance(name, str) and name.casefold() in self._ids

    def display_name(self, name: str) -> str:
        return self._display[name.casefold()]


@dataclass(frozen=True)
class ColumnMap:
    """Maps logical fields to header names of a delimited database file.

    Columns not mapped to a metadata field and not listed in ``ignore`` are
    features, unless ``features`` names them explicitly.
    """

    inventory_id: str = "InventoryID"
    language_name: str = "LanguageName"
    language_code: str = "ISO6393"
    glottocode: str = "Glottocode"
    source: str = "Source"
    family: str = "Family"
    glyph: str = "Phoneme"
    segment_class: str = "SegmentClass"
    allophones: str = "Allophones"
    marginal: str = "Marginal"
    features: tuple[str, ...] | None = None
    ignore: tuple[str, ...] = ("SpecificDialect", "GlyphID")
    delimiter: str = ","

    MANDATORY = ("inventory_id", "language_name", "glyph", "segment_class")
    METADATA = ("inventory_id", "language_name", "language_code", "glottocode", "source",
                "family", "glyph", "segment_class", "allophones", "marginal")

    @classmethod
    def from_file(cls, path) -> "ColumnMap":
        """Read ``key=value`` lines (``#`` comments); list values are comma separated."""
        kwargs = {}
        names = {f.name for f in dataclasses.fields(cls)}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or key not in names:
                raise UsageError(f"{path}:{lineno}: bad column-map entry {line!r}")
            if key in ("features", "ignore"):
                kwargs[key] = tuple(v.strip() for v in value.split(",") if v.strip())
            elif key == "delimiter":
                kwargs[key] = "\t" if value in ("\\t", "tab", "TAB") else value
            else:
                kwargs[key] = value
        return cls(**kwargs)


@dataclass(frozen=True)
class ParseStats:
    rows: int = 0
    duplicate_rows: int = 0
    contour_tokens: int = 0
    conflicts: tuple[str, ...] = ()


class TypologyDatabase:
    """Parsed inventories, segments and feature vectors; immutable once built.

    Attributes
    ----------
    feature_system : FeatureSystem
    segments : Mapping[str, Segment]
        Glyph (normalized) to segment, first-seen vector for each glyph.
    inventories : Mapping[str, Inventory]
        Inventory id to inventory, in natural id order.
    by_language : LanguageIndex
        Language name (case-insensitive) to inventory ids.
    attestation : Mapping[str, int]
        Glyph to the number of inventories containing it.
    """

    def __init__(self, feature_system: FeatureSystem, inventories: Iterable[Inventory],
                 stats: ParseStats | None = None):
        self.feature_system = feature_system
        invs = sorted(inventories, key=lambda inv: natural_key(inv.inventory_id))
        ids = [inv.inventory_id for inv in invs]
        if len(set(ids)) != len(ids):
            raise ParseError("duplicate inventory ids")
        segments = {}
        attestation = Counter()
        by_language = {}
        for inv in invs:
            for seg in inv.segments:
                if seg.features.system != feature_system:
                    raise DimensionError(f"segment {seg.glyph!r} uses a foreign feature system")
                segments.setdefault(seg.glyph, seg)
                attestation[seg.glyph] += 1
            by_language.setdefault(inv.language_name.casefold(), (inv.language_name, []))[1].append(
                inv.inventory_id)
        self.inventories = MappingProxyType({inv.inventory_id: inv for inv in invs})
        self.segments = MappingProxyType(dict(sorted(segments.items())))
        self.attestation = MappingProxyType(dict(sorted(attestation.items())))
        self.by_language = LanguageIndex({name: ids for name, ids in by_language.values()})
        self.stats = stats or ParseStats()

    def __reduce__(self):
        return (TypologyDatabase, (self.feature_system, list(self.inventories.values()), self.stats))

    def __eq__(self, other):
        if not isinstance(other, TypologyDatabase):
            return NotImplemented
        return (self.feature_system == other.feature_system
                and dict(self.segments) == dict(other.segments)
                and dict(self.inventories) == dict(other.inventories))

    __hash__ = None

    def __repr__(self):
        return (f"TypologyDatabase({len(self.inventories)} inventories, "
                f"{len(self.by_language)} languages, {len(self.segments)} segments)")

    @property
    def languages(self) -> list[str]:
        return sorted(self.by_language, key=str.casefold)

    def language_of(self, inventory: Inventory) -> str:
        return self.by_language.display_name(inventory.language_name)

    def summary(self) -> dict:
        return {
            "inventories": len(self.inventories),
            "languages": len(self.by_language),
            "segments": len(self.segments),
            "features": len(self.feature_system),
            "rows": self.stats.rows,
            "duplicate_rows": self.stats.duplicate_rows,
            "contour_tokens": self.stats.contour_tokens,
            "conflicts": len(self.stats.conflicts),
            "conflict_glyphs": list(self.stats.conflicts),
        }


def _clean(value: str) -> str:
    value = value.strip()
    return "" if value in MISSING_TOKENS else value


def parse_phoible(source: BinaryIO, column_map: ColumnMap | None = None, *,
                  contour_policy: str = "first",
                  conflict_policy: str = "error") -> TypologyDatabase:
    """Parse a PHOIBLE long-format byte stream into a :class:`TypologyDatabase`.

    Parameters
    ----------
    source : binary file object
        UTF-8 delimited text with a header row.
    column_map : ColumnMap, optional
        Header names and delimiter; defaults follow the public PHOIBLE release.
    contour_policy : {"first", "unspecified"}
        Value assigned to contour tokens such as ``+,-``. The raw token is
        always preserved.
    conflict_policy : {"error", "per_inventory"}
        What to do when one glyph appears with different feature vectors in
        different inventories: raise :class:`ConflictError`, or keep each
        inventory's own vector (the segment table holds the first one seen).
    """
    cmap = column_map or ColumnMap()
    if contour_policy not in ("first", "unspecified"):
        raise UsageError(f"unknown contour policy {contour_policy!r}")
    if conflict_policy not in ("error", "per_inventory"):
        raise UsageError(f"unknown conflict policy {conflict_policy!r}")

    text = io.TextIOWrapper(source, encoding="utf-8-sig", newline="")
    reader = csv.reader(text, delimiter=cmap.delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty database file") from None
    except UnicodeDecodeError as exc:
        raise ParseError(f"database is not UTF-8: {exc}") from None
    header = [h.strip() for h in header]
    col = {h: i for i, h in enumerate(header)}
    for name in ColumnMap.MANDATORY:
        if getattr(cmap, name) not in col:
            raise ParseError(f"missing mandatory column {getattr(cmap, name)!r} ({name})")

    meta_cols = {getattr(cmap, name) for name in ColumnMap.METADATA}
    if cmap.features is not None:
        missing = [f for f in cmap.features if f not in col]
        if missing:
            raise ParseError(f"missing feature columns: {missing}")
        feature_names = tuple(cmap.features)
    else:
        feature_names = tuple(h for h in header if h not in meta_cols and h not in cmap.ignore)
    system = FeatureSystem(feature_names)
    feat_idx = [col[f] for f in feature_names]

    def opt(name):
        return col.get(getattr(cmap, name))

    i_inv, i_lang, i_glyph, i_class = (col[getattr(cmap, n)] for n in ColumnMap.MANDATORY)
    i_code, i_glotto, i_src, i_fam = opt("language_code"), opt("glottocode"), opt("source"), opt("family")
    extra_cols = [(getattr(cmap, n), col[getattr(cmap, n)])
                  for n in ("allophones", "marginal") if getattr(cmap, n) in col]

    token_cache: dict[str, TernaryValue] = {}
    vector_cache: dict[tuple[str, ...], FeatureVector] = {}
    first_vector: dict[str, tuple[tuple[str, ...], str]] = {}
    conflicts: dict[str, None] = {}
    inv_meta: dict[str, dict] = {}
    inv_rows: dict[str, dict[str, tuple]] = {}
    n_rows = n_dup = n_contour = 0

    def vector_for(tokens):
        vec = vector_cache.get(tokens)
        if vec is None:
            vals = []
            for tok in tokens:
                tv = token_cache.get(tok)
                if tv is None:
                    tv = token_cache[tok] = TernaryValue.parse(tok, contour_policy)
                vals.append(tv)
            vec = vector_cache[tokens] = FeatureVector(tuple(vals), system)
        return vec

    try:
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            lineno = reader.line_num
            if len(row) != len(header):
                raise ParseError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            n_rows += 1
            inv_id = row[i_inv].strip()
            if not inv_id:
                raise ParseError(f"line {lineno}: empty inventory id")
            glyph = normalize_glyph(row[i_glyph])
            if not glyph:
                raise ParseError(f"line {lineno}: empty glyph")
            tokens = tuple(row[i] for i in feat_idx)
            try:
                vector_for(tokens)
            except ParseError as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
            n_contour += sum(CONTOUR_SEPARATOR in t for t in tokens)
            meta = inv_meta.get(inv_id)
            if meta is None:
                inv_meta[inv_id] = dict(
                    language_name=row[i_lang].strip(),
                    language_code=_clean(row[i_code]) if i_code is not None else "",
                    glottocode=_clean(row[i_glotto]) if i_glotto is not None else "",
                    source=row[i_src].strip() if i_src is not None else "",
                    family=_clean(row[i_fam]) if i_fam is not None else "",
                )
                inv_rows[inv_id] = {}
            seen = inv_rows[inv_id].get(glyph)
            if seen is not None:
                if seen[0] != tokens:
                    raise ConflictError(glyph, seen[0], tokens, [inv_id])
                n_dup += 1
                continue
            inv_rows[inv_id][glyph] = (tokens, row[i_class], {k: row[i] for k, i in extra_cols if row[i]})
            prior = first_vector.get(glyph)
            if prior is None:
                first_vector[glyph] = (tokens, inv_id)
            elif prior[0] != tokens:
                if conflict_policy == "error":
                    raise ConflictError(glyph, prior[0], tokens, [prior[1], inv_id])
                conflicts[glyph] = None
    except csv.Error as exc:
        raise ParseError(f"line {reader.line_num}: {exc}") from None
    except UnicodeDecodeError as exc:
        raise ParseError(f"database is not UTF-8: {exc}") from None

    if not inv_meta:
        raise ParseError("database file has a header but no data rows")
    if n_dup:
        logger.warning("dropped %d duplicate (inventory, glyph) rows", n_dup)
    if conflicts:
        logger.warning("%d glyphs carry inventory-specific feature vectors", len(conflicts))

    # one Segment object per distinct (glyph, vector) so that shared glyphs are shared objects
    seg_cache: dict[tuple, Segment] = {}
    inventories = []
    for inv_id, meta in inv_meta.items():
        segs, notes = [], {}
        for glyph, (tokens, cls, extras) in inv_rows[inv_id].items():
            key = (glyph, tokens)
            seg = seg_cache.get(key)
            if seg is None:
                seg = seg_cache[key] = Segment(glyph, cls, vector_for(tokens))
            segs.append(seg)
            if extras:
                notes[glyph] = extras
        inventories.append(Inventory(inventory_id=inv_id, segments=tuple(segs),
                                     annotations=notes, **meta))
    stats = ParseStats(n_rows, n_dup, n_contour, tuple(sorted(conflicts)))
    return TypologyDatabase(system, inventories, stats)


def write_phoible(db: TypologyDatabase, stream, column_map: ColumnMap | None = None) -> None:
    """Canonical re-serialization; :func:`parse_phoible` reads it back to an equal database.

    ``stream`` is a text stream opened with ``newline=""``.
    """
    cmap = column_map or ColumnMap()
    meta = [cmap.inventory_id, cmap.language_name, cmap.language_code, cmap.glottocode,
            cmap.source, cmap.family, cmap.glyph, cmap.segment_class, cmap.allophones,
            cmap.marginal]
    writer = csv.writer(stream, delimiter=cmap.delimiter, lineterminator="\n")
    writer.writerow(meta + list(db.feature_system.feature_names))
    for inv in db.inventories.values():
        for seg in inv.segments:
            notes = inv.annotations.get(seg.glyph, {})
            writer.writerow([inv.inventory_id, inv.language_name, inv.language_code,
                             inv.glottocode, inv.source, inv.family, seg.glyph,
                             seg.segment_class, notes.get(cmap.allophones, ""),
                             notes.get(cmap.marginal, "")] + list(seg.features.tokens()))


def dumps_phoible(db: TypologyDatabase, column_map: ColumnMap | None = None) -> str:
    buf = io.StringIO(newline="")
    write_phoible(db, buf, column_map)
    return buf.getvalue()


SNAPSHOT_MAGIC = b"PHONOTYPO-DB\n"


def save_snapshot(db: TypologyDatabase, path) -> None:
    """Binary snapshot: magic line, tool version line, then a pickle of the database."""
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(__version__.encode() + b"\n")
        pickle.dump(db, fh, protocol=pickle.HIGHEST_PROTOCOL)


def load_snapshot(path) -> TypologyDatabase:
    with open(path, "rb") as fh:
        if fh.readline() != SNAPSHOT_MAGIC:
            raise ParseError(f"{path} is not a database snapshot")
        version = fh.readline().strip().decode()
        if version != __version__:
            raise ParseError(f"snapshot {path} was written by version {version}, "
                             f"this is {__version__}; re-run import")
        return pickle.load(fh)


def is_snapshot(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(len(SNAPSHOT_MAGIC)) == SNAPSHOT_MAGIC


def load_database(path, column_map: ColumnMap | None = None, **kwargs) -> TypologyDatabase:
    """Open a delimited file (optionally gzipped) or a binary snapshot."""
    path = Path(path)
    if is_snapshot(path):
        return load_snapshot(path)
    with open(path, "rb") as fh:
        gz = fh.read(2) == b"\x1f\x8b"
    if column_map is None and path.name.removesuffix(".gz").endswith(".tsv"):
        column_map = ColumnMap(delimiter="\t")
    opener = gzip.open if gz else open
    with opener(path, "rb") as fh:
        return parse_phoible(fh, column_map, **kwargs)


def summary_json(db: TypologyDatabase) -> str:
    return json.dumps(db.summary(), ensure_ascii=False, indent=2)


def feature_vector(db: TypologyDatabase, glyph: str) -> FeatureVector:
    g = normalize_glyph(glyph)
    try:
        return db.segments[g].features
    except KeyError:
        raise SegmentNotFound(g) from None


def feature_distance(a: FeatureVector, b: FeatureVector, policy: str = "specified_only") -> float:
    """Fraction of disagreeing features between two vectors, in [0, 1].

    ``specified_only`` compares features specified on both sides.
    ``penalize_mismatch_to_unspecified`` also counts a feature specified on
    one side only as half a disagreement, over features specified on either side.
    """
    if len(a) != len(b):
        raise DimensionError(f"vector lengths differ: {len(a)} vs {len(b)}")
    sa, sb = a.signs, b.signs
    spec_a, spec_b = sa != 0, sb != 0
    both = spec_a & spec_b
    differ = int(np.count_nonzero(both & (sa != sb)))
    if policy == "specified_only":
        n = int(np.count_nonzero(both))
        return differ / n if n else 0.0
    if policy == "penalize_mismatch_to_unspecified":
        n = int(np.count_nonzero(spec_a | spec_b))
        half = int(np.count_nonzero(spec_a ^ spec_b))
        return (differ + 0.5 * half) / n if n else 0.0
    raise UsageError(f"unknown distance policy {policy!r}")


def _coerce_constraints(system: FeatureSystem, constraints) -> list[tuple[int, Ternary]]:
    if isinstance(constraints, Mapping):
        constraints = constraints.items()
    out = []
    for name, value in constraints:
        if name not in system:
            raise UsageError(f"unknown feature {name!r}")
        out.append((system.index[name], as_ternary(value)))
    return out


def segments_matching(db: TypologyDatabase, constraints) -> list[Segment]:
    """Segments whose vector equals every ``(feature, value)`` constraint, sorted by glyph.

    Unspecified in a constraint matches only unspecified.
    """
    cons = _coerce_constraints(db.feature_system, constraints)
    return [seg for seg in db.segments.values()
            if all(seg.features.values[i].value is v for i, v in cons)]


def segment_matches(segment: Segment, constraints) -> bool:
    cons = _coerce_constraints(segment.features.system, constraints)
    return all(segment.features.values[i].value is v for i, v in cons)


def inventories_for_language(db: TypologyDatabase, query: str) -> list[Inventory]:
    """Inventories whose language name or ISO 639-3 code equals ``query`` (case-insensitive)."""
    q = query.strip().casefold()
    if not q:
        return []
    return [inv for inv in db.inventories.values()
            if inv.language_name.casefold() == q or (inv.language_code and inv.language_code.casefold() == q)]
