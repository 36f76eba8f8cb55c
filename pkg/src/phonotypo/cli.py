"""``phonotypo`` command-line front end.

Every subcommand validates its options against :data:`OPTION_SPECS`,
writes its JSON result (to ``--out`` or stdout) and a run manifest.
``--config FILE`` supplies option values from a JSON object; explicit
flags win. A manifest is itself a valid config, so

    phonotypo decode --config run.manifest.json

replays a run. Exit status: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Callable

from . import __version__
from .config import DATA_DIR_ENV, DEFAULT_LAMBDA, DEFAULT_MIN_CONTAINMENT, resolve_input
from .errors import PhonotypoError, UsageError

log = logging.getLogger("phonotypo")


@dataclass(frozen=True)
class Opt:
    name: str
    kind: str = "str"          # str, int, float, bool, list, choice
    default: Any = None
    required: bool = False
    choices: tuple = ()
    help: str = ""
    input_file: bool = False
    minimum: float | None = None


COMMON = (
    Opt("config", help="JSON file of option values (flags take precedence)"),
    Opt("manifest", help="manifest path (default: <out>.manifest.json)"),
    Opt("quiet", "bool", False, help="only log warnings and errors"),
    Opt("json_logs", "bool", False, help="log records as JSON lines"),
)
_DB = Opt("db", required=True, input_file=True, help="PHOIBLE-style CSV/TSV (optionally .gz) or snapshot")
_DB_OPTS = (
    _DB,
    Opt("conflict_policy", "choice", "per_inventory", choices=("error", "per_inventory"),
        help="how to treat one glyph with two feature vectors"),
    Opt("contour_policy", "choice", "first", choices=("first", "unspecified"),
        help="how to read contour tokens such as '+,-'"),
    Opt("column_map", input_file=True, help="key=value file overriding CSV column names"),
)
_DECODE_OPTS = (
    Opt("switch_penalty", "float", 0.0, minimum=0.0, help="log-score cost of each segment change"),
    Opt("min_duration", "int", 1, minimum=1, help="minimum run length in frames"),
    Opt("top_k", "int", 1024, minimum=1, help="candidates kept per frame"),
)
_ANCHOR = (
    Opt("seed_language", help="language whose largest inventory anchors the search"),
    Opt("prior", input_file=True, help="JSON object language -> weight (summing to 1)"),
)

OPTION_SPECS: dict[str, tuple[Opt, ...]] = {
    "import": _DB_OPTS + (
        Opt("out", required=True, help="snapshot path"),
    ),
    "contrast-eval": (
        Opt("db", input_file=True, help="database (default: shipped transfer benchmark)"),
        *_DB_OPTS[1:],
        Opt("contrast_config", required=True, input_file=True,
            help="JSON with 'contrast' and optional 'realization', 'hyper', 'repeats', 'families'"),
        Opt("languages", "list", help="comma-separated languages (default: from the contrast config)"),
        Opt("test_languages", "list", help="train on --languages, test on these"),
        Opt("mode", "choice", "symbolic", choices=("symbolic", "synthetic")),
        Opt("protocol", "choice", "lolo", choices=("lolo", "heldout", "transfer"),
            help="leave-one-language-out, fixed split, or the two-family transfer benchmark"),
        Opt("seed", "int", None, minimum=0, help="realization seed (default: from the contrast config)"),
        Opt("workers", "int", 1, minimum=1),
        Opt("out", help="JSON report path (default: stdout)"),
    ),
    "gen-stream": _DB_OPTS + (
        Opt("inventory_id", required=True),
        Opt("frames", "int", 200, minimum=0),
        Opt("noise", "float", 0.1, minimum=0.0, help="Gaussian noise sigma"),
        Opt("mu_plus", "float", 0.9),
        Opt("mu_minus", "float", 0.1),
        Opt("mean_run", "float", 5.0, minimum=1.0, help="mean run length in frames"),
        Opt("seed", "int", 0, minimum=0),
        Opt("out", required=True, help="stream TSV path"),
        Opt("truth", help="write the generating alignment JSON here (default: stdout)"),
    ),
    "decode": _DB_OPTS + (
        Opt("stream", required=True, input_file=True, help="stream TSV"),
        Opt("inventory_id", required=True),
        *_DECODE_OPTS,
        Opt("out", help="alignment JSON path (default: stdout)"),
    ),
    "score-inventory": _DB_OPTS + (
        Opt("streams", "list", required=True, input_file=True, help="stream TSV files or directories"),
        Opt("inventory_ids", "list", required=True),
        Opt("lambda", "float", DEFAULT_LAMBDA, minimum=0.0, help="size penalty per segment per stream"),
        *_DECODE_OPTS,
        Opt("workers", "int", 1, minimum=1),
        Opt("out", help="JSON comparison path (default: stdout)"),
    ),
    "induce": _DB_OPTS + (
        Opt("streams", "list", required=True, input_file=True, help="stream TSV files or directories"),
        *_ANCHOR,
        Opt("k", "int", 5, minimum=1, help="neighbour languages feeding the pool"),
        Opt("metric", "choice", "jaccard", choices=("jaccard", "feature_match")),
        Opt("pool_size", "int", 40, minimum=1),
        Opt("merge_indistinguishable", "bool", True,
            help="drop pool glyphs identical in features to a heavier glyph"),
        Opt("lambda", "float", DEFAULT_LAMBDA, minimum=0.0),
        Opt("max_size", "int", 64, minimum=1),
        Opt("prune", "bool", True, help="try removals after each addition"),
        Opt("admissibility", "choice", "co_occurrence", choices=("per_segment", "co_occurrence")),
        Opt("min_attestation", "int", 1, minimum=1),
        Opt("min_containment", "float", DEFAULT_MIN_CONTAINMENT, minimum=0.0),
        *_DECODE_OPTS,
        Opt("out", help="JSON result path (default: stdout)"),
    ),
    "nearest-langs": _DB_OPTS + (
        *_ANCHOR,
        Opt("metric", "choice", "jaccard", choices=("jaccard", "feature_match")),
        Opt("k", "int", 5, minimum=1),
        Opt("exclude", "list", help="languages to leave out of the ranking"),
        Opt("out", help="JSON ranking path (default: stdout)"),
    ),
}

SUBCOMMAND_HELP = {
    "import": "parse a PHOIBLE-style file and cache it as a snapshot",
    "contrast-eval": "train and test a contrast classifier across languages",
    "gen-stream": "sample a synthetic posterior stream from an inventory",
    "decode": "align a posterior stream to an inventory's segments",
    "score-inventory": "compare inventories by penalized fit to streams",
    "induce": "select an inventory for streams from a neighbour-language pool",
    "nearest-langs": "rank languages by inventory similarity",
}

_NOT_RECORDED = {"config", "manifest", "quiet", "json_logs"}


def _specs(sub: str) -> dict[str, Opt]:
    return {o.name: o for o in OPTION_SPECS[sub] + COMMON}


@dataclass(frozen=True)
class Command:
    """A validated invocation.

    ``options`` holds every option of the subcommand, resolved from flags,
    config file and defaults, in that order of precedence.
    """
    subcommand: str
    options: MappingProxyType
    explicit: frozenset = field(default_factory=frozenset)

    @property
    def inputs(self) -> dict[str, Any]:
        specs = _specs(self.subcommand)
        return {k: v for k, v in self.options.items() if specs[k].input_file and v is not None}

    @property
    def out(self):
        return self.options.get("out")

    def recorded_options(self) -> dict:
        return {k: v for k, v in self.options.items() if k not in _NOT_RECORDED}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phonotypo", description="Phoneme inventory typology workflows.",
                     epilog="exit status: 0 success, 1 domain error, 2 usage error")
    parser.add_argument("--version", action="version", version=f"phonotypo {__version__}")
    subs = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)
    subs.required = True
    for sub, opts in OPTION_SPECS.items():
        p = subs.add_parser(sub, help=SUBCOMMAND_HELP[sub], description=SUBCOMMAND_HELP[sub])
        for o in opts + COMMON:
            kw = dict(dest=o.name, default=argparse.SUPPRESS, help=o.help or None)
            if o.kind == "bool":
                p.add_argument(_flag(o.name), action=argparse.BooleanOptionalAction, **kw)
            elif o.kind == "list":
                p.add_argument(_flag(o.name), nargs="+", metavar=o.name.upper(), **kw)
            else:
                p.add_argument(_flag(o.name), metavar=o.name.upper(), **kw)
    return parser


def _read_config(path: str, sub: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"--config: cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"--config: {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"--config: {path} must hold a JSON object")
    if "subcommand" in data and "options" in data:
        if data["subcommand"] != sub:
            raise UsageError(f"--config: manifest is for {data['subcommand']!r}, not {sub!r}")
        data = data["options"]
        if not isinstance(data, dict):
            raise UsageError(f"--config: manifest options must be a JSON object")
    specs = _specs(sub)
    out = {}
    for key, value in data.items():
        name = key.lstrip("-").replace("-", "_")
        if name not in specs or name in ("config", "manifest"):
            raise UsageError(f"--config: unknown option {key!r} for {sub}")
        out[name] = value
    return out


def _coerce(o: Opt, value):
    flag = _flag(o.name)
    if value is None:
        return None
    try:
        if o.kind == "bool":
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.lower() in ("true", "false"):
                return value.lower() == "true"
            raise ValueError(value)
        if o.kind == "list":
            items = [value] if isinstance(value, str) else list(value)
            flat = [p.strip() for item in items for p in str(item).split(",")]
            flat = [p for p in flat if p]
            if not flat:
                raise ValueError("empty list")
            return flat
        if isinstance(value, (list, dict)) or isinstance(value, bool):
            raise ValueError(value)
        if o.kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            v = int(value)
        elif o.kind == "float":
            v = float(value)
            if not math.isfinite(v):
                raise ValueError(value)
        else:
            v = str(value)
    except (TypeError, ValueError):
        raise UsageError(f"{flag}: invalid {o.kind} value {value!r}") from None
    if o.choices and v not in o.choices:
        raise UsageError(f"{flag}: {v!r} is not one of {', '.join(o.choices)}")
    if o.minimum is not None and v < o.minimum:
        raise UsageError(f"{flag}: must be >= {o.minimum}, got {v}")
    return v


def parse_args(argv) -> Command:
    """Parse and validate ``argv`` (without the program name)."""
    ns = vars(build_parser().parse_args(list(argv)))
    sub = ns.pop("subcommand")
    specs = _specs(sub)
    explicit = dict(ns)
    merged = {}
    if explicit.get("config"):
        merged.update(_read_config(explicit["config"], sub))
    merged.update(explicit)
    options = {}
    for name, o in specs.items():
        value = _coerce(o, merged.get(name, o.default))
        if o.required and value is None:
            raise UsageError(f"{sub}: missing required option {_flag(name)}")
        options[name] = value
    if sub in ("induce", "nearest-langs"):
        given = [n for n in ("seed_language", "prior") if options[n] is not None]
        if len(given) != 1:
            raise UsageError(f"{sub}: give exactly one of --seed-language or --prior")
    if sub == "contrast-eval":
        if options["protocol"] == "heldout" and not options["test_languages"]:
            raise UsageError("contrast-eval: --protocol heldout needs --test-languages")
    return Command(sub, MappingProxyType(options), frozenset(explicit))


# ----------------------------------------------------------------- helpers

def load_schema(name: str) -> dict:
    """JSON Schema for a subcommand's output, or ``"manifest"``."""
    from importlib import resources
    res = resources.files("phonotypo").joinpath("schemas", f"{name}.schema.json")
    return json.loads(res.read_text(encoding="utf-8"))


def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return _json_safe(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_json_safe(obj), ensure_ascii=False, indent=2, allow_nan=False) + "\n"


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path, data: bytes | str) -> None:
    """Write ``data`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _input_path(value) -> Path:
    p = resolve_input(value)
    if not p.exists():
        raise FileNotFoundError(f"no such file: {value}")
    return p


def _stream_paths(values) -> list[Path]:
    paths = []
    for v in values:
        p = _input_path(v)
        if p.is_dir():
            found = sorted(p.glob("*.tsv"))
            if not found:
                raise FileNotFoundError(f"no .tsv streams in directory {v}")
            paths.extend(found)
        else:
            paths.append(p)
    return paths


def _load_db(opts):
    from .typology import ColumnMap, load_database
    cmap = ColumnMap.from_file(_input_path(opts["column_map"])) if opts.get("column_map") else None
    return load_database(_input_path(opts["db"]), cmap, conflict_policy=opts["conflict_policy"],
                         contour_policy=opts["contour_policy"])


def _inventory(db, inventory_id):
    inv = db.inventories.get(str(inventory_id))
    if inv is None:
        raise UsageError(f"--inventory-id: no inventory {inventory_id!r} in the database")
    return inv


def _decode_params(opts):
    from .decoder import DecodeParams
    return DecodeParams(opts["switch_penalty"], opts["top_k"], opts["min_duration"])


def _read_streams(paths):
    from .decoder import read_stream
    out = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            out.append(read_stream(fh))
    return out


def _anchor(db, opts):
    from .induction import LanguagePrior, seed_inventory
    if opts["prior"] is not None:
        with open(_input_path(opts["prior"]), encoding="utf-8") as fh:
            weights = json.load(fh)
        if not isinstance(weights, dict):
            raise UsageError("--prior: expected a JSON object language -> weight")
        return LanguagePrior(weights), {"prior": weights}
    inv = seed_inventory(db, opts["seed_language"])
    return inv, {"seed_language": opts["seed_language"], "seed_inventory": inv.inventory_id}


# ------------------------------------------------------------ subcommands

def _run_import(opts, files):
    from .typology import save_snapshot
    db = _load_db(opts)
    out = Path(opts["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{out.name}.", suffix=".tmp", dir=out.parent)
    os.close(fd)
    try:
        save_snapshot(db, tmp)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, out)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    files.append(out)
    result = {"snapshot": str(out), "version": __version__}
    result.update(db.summary())
    return result, None


def _run_contrast_eval(opts, files):
    from .benchmarks import load_transfer_benchmark, transfer_benchmark
    from .contrast import (ContrastSpec, Hyper, RealizationParams, evaluate_heldout,
                           leave_one_language_out, pooled_accuracy)
    with open(_input_path(opts["contrast_config"]), encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict) or "contrast" not in cfg:
        raise UsageError("--contrast-config: expected a JSON object with a 'contrast' entry")
    db = _load_db(opts) if opts["db"] else load_transfer_benchmark()[0]
    seed = opts["seed"]
    if seed is None:
        seed = int(cfg.get("realization", {}).get("seed", 0))
    contrast = ContrastSpec.from_dict(cfg["contrast"])
    header = {"protocol": opts["protocol"], "mode": opts["mode"], "seed": seed,
              "contrast": contrast.to_dict()}
    if opts["protocol"] == "transfer":
        res = transfer_benchmark(db, cfg, seed=seed)
        header["mode"] = "synthetic"
        header.update(res)
        return header, {"seed": seed}
    languages = opts["languages"] or cfg.get("languages")
    if not languages:
        raise UsageError("contrast-eval: no languages (use --languages or a 'languages' config entry)")
    real = None
    if opts["mode"] == "synthetic":
        real = RealizationParams.from_dict({**cfg.get("realization", {}), "seed": seed})
    hyper = Hyper.from_dict(cfg.get("hyper", {}))
    repeats = int(cfg.get("repeats", 1))
    families = cfg.get("families")
    header.update(realization=real.to_dict() if real else None,
                  hyper={"learning_rate": hyper.learning_rate, "epochs": hyper.epochs, "l2": hyper.l2},
                  repeats=repeats)
    if opts["protocol"] == "heldout":
        rep = evaluate_heldout(db, contrast, languages, opts["test_languages"], opts["mode"], real,
                               hyper, repeats, families)
        reports, macro = [rep], rep.macro_accuracy
    else:
        reports = leave_one_language_out(db, contrast, languages, opts["mode"], real, hyper, repeats,
                                         families, max_workers=opts["workers"])
        macro = pooled_accuracy(reports)
    header.update(macro_accuracy=macro, folds=[r.to_dict() for r in reports])
    return header, {"seed": seed}


def _run_gen_stream(opts, files):
    from .decoder import dumps_stream, generate_stream
    db = _load_db(opts)
    inv = _inventory(db, opts["inventory_id"])
    stream, truth = generate_stream(inv, opts["frames"], opts["mean_run"], opts["mu_plus"],
                                    opts["mu_minus"], opts["noise"], seed=opts["seed"],
                                    feature_names=db.feature_system.feature_names)
    atomic_write(opts["out"], dumps_stream(stream))
    files.append(Path(opts["out"]))
    result = {"inventory_id": inv.inventory_id, "language": inv.language_name,
              "stream": str(opts["out"]), "seed": opts["seed"], "truth": truth.to_dict()}
    if opts["truth"]:
        atomic_write(opts["truth"], dumps(result))
        files.append(Path(opts["truth"]))
    return result, {"seed": opts["seed"]}


def _run_decode(opts, files):
    from .decoder import constrained_decode
    db = _load_db(opts)
    inv = _inventory(db, opts["inventory_id"])
    (stream,) = _read_streams([_input_path(opts["stream"])])
    params = _decode_params(opts)
    ali = constrained_decode(stream, inv, params)
    result = {"inventory_id": inv.inventory_id, "language": inv.language_name,
              "params": {"switch_penalty": params.switch_penalty, "min_duration": params.min_duration,
                         "top_k": params.top_k}}
    result.update(ali.to_dict())
    return result, None


def _run_score_inventory(opts, files):
    from .induction import InductionParams, score_inventory
    from .typology import natural_key
    db = _load_db(opts)
    invs = [_inventory(db, i) for i in opts["inventory_ids"]]
    paths = _stream_paths(opts["streams"])
    streams = _read_streams(paths)
    params = InductionParams(lam=opts["lambda"], decode=_decode_params(opts))
    scores = []
    for inv in invs:
        sc = score_inventory(streams, inv, params, max_workers=opts["workers"])
        scores.append({"inventory_id": inv.inventory_id, "language": inv.language_name,
                       "source": inv.source, **sc.to_dict()})
    ranking = sorted(scores, key=lambda s: (-s["penalized"], natural_key(s["inventory_id"])))
    return {"lambda": opts["lambda"], "n_streams": len(streams),
            "streams": [str(p) for p in paths], "scores": scores,
            "ranking": [s["inventory_id"] for s in ranking],
            "best": ranking[0]["inventory_id"]}, None


def _run_induce(opts, files):
    from .induction import (InductionParams, admissibility_filter, build_candidate_pool,
                            induce_inventory, nearest_languages, score_inventory)
    db = _load_db(opts)
    anchor, anchor_info = _anchor(db, opts)
    ranked = nearest_languages(db, anchor, opts["metric"], opts["k"])
    pool = build_candidate_pool(db, ranked, max_size=opts["pool_size"],
                                merge_indistinguishable=opts["merge_indistinguishable"])
    paths = _stream_paths(opts["streams"])
    streams = _read_streams(paths)
    params = InductionParams(lam=opts["lambda"], max_size=opts["max_size"], prune=opts["prune"],
                             decode=_decode_params(opts))
    inv, trace = induce_inventory(streams, pool, params)
    score = score_inventory(streams, inv, params)
    _, report = admissibility_filter(inv.glyphs, db, opts["min_attestation"], opts["admissibility"],
                                     opts["min_containment"])
    return {"anchor": anchor_info, "metric": opts["metric"],
            "neighbours": [{"language": l, "score": s} for l, s in ranked],
            "pool": [{"glyph": g, "weight": w} for g, w in pool.ranked()],
            "streams": [str(p) for p in paths],
            "params": params.to_dict(),
            "inventory": sorted(inv.glyphs),
            "score": score.to_dict(),
            "trace": [{"glyph": s.glyph, "gain": s.gain, "action": s.action} for s in trace],
            "admissibility": report}, None


def _run_nearest_langs(opts, files):
    from .induction import nearest_languages
    db = _load_db(opts)
    anchor, anchor_info = _anchor(db, opts)
    ranked = nearest_languages(db, anchor, opts["metric"], opts["k"], exclude=opts["exclude"] or ())
    return {"anchor": anchor_info, "metric": opts["metric"], "k": opts["k"],
            "ranking": [{"language": l, "score": s} for l, s in ranked]}, None


RUNNERS: dict[str, Callable] = {
    "import": _run_import,
    "contrast-eval": _run_contrast_eval,
    "gen-stream": _run_gen_stream,
    "decode": _run_decode,
    "score-inventory": _run_score_inventory,
    "induce": _run_induce,
    "nearest-langs": _run_nearest_langs,
}

# subcommands whose --out holds something other than the JSON result
_OUT_IS_ARTIFACT = {"import", "gen-stream"}


def build_manifest(cmd: Command, seeds: dict | None, outputs: list[Path]) -> dict:
    inputs = {}
    for name, value in cmd.inputs.items():
        if name == "streams":
            inputs[name] = [{"path": str(p), "sha256": sha256_file(p)} for p in _stream_paths(value)]
        else:
            p = _input_path(value)
            inputs[name] = {"path": str(value), "sha256": sha256_file(p)}
    return {
        "tool": "phonotypo",
        "version": __version__,
        "subcommand": cmd.subcommand,
        "options": _json_safe(cmd.recorded_options()),
        "inputs": inputs,
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "seeds": seeds or {},
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def execute(cmd: Command, stdout=None) -> int:
    """Run a validated command; raises domain errors for :func:`main` to map."""
    stdout = stdout or sys.stdout
    opts = dict(cmd.options)
    files: list[Path] = []
    result, seeds = RUNNERS[cmd.subcommand](opts, files)
    text = dumps(result)
    if cmd.subcommand == "contrast-eval" and seeds:
        opts["seed"] = seeds["seed"]
        cmd = Command(cmd.subcommand, MappingProxyType(opts), cmd.explicit)
    if cmd.out and cmd.subcommand not in _OUT_IS_ARTIFACT:
        atomic_write(cmd.out, text)
        files.append(Path(cmd.out))
    elif not (cmd.subcommand == "gen-stream" and opts["truth"]):
        stdout.write(text)
    manifest = build_manifest(cmd, seeds, files)
    target = opts.get("manifest") or (f"{cmd.out}.manifest.json" if cmd.out else None)
    if target:
        atomic_write(target, dumps(manifest))
        log.info("manifest written to %s", target)
    else:
        log.info("manifest %s", json.dumps(manifest, ensure_ascii=False))
    return 0


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname, "logger": record.name,
                           "message": record.getMessage()}, ensure_ascii=False)


def _setup_logging(quiet: bool, json_logs: bool):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonFormatter() if json_logs else logging.Formatter("%(levelname)s %(message)s"))
    root = logging.getLogger("phonotypo")
    root.handlers[:] = [handler]
    root.propagate = False
    root.setLevel(logging.WARNING if quiet else logging.INFO)


def _report(exc, kind=None) -> str:
    if isinstance(exc, PhonotypoError):
        d = exc.to_dict()
    else:
        d = {"error": kind or type(exc).__name__, "message": str(exc)}
    return json.dumps(_json_safe(d), ensure_ascii=False)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(_report(exc) + "\n")
        return 2
    _setup_logging(cmd.options["quiet"], cmd.options["json_logs"])
    if os.environ.get(DATA_DIR_ENV):
        log.debug("data directory %s", os.environ[DATA_DIR_ENV])
    try:
        return execute(cmd)
    except UsageError as exc:
        sys.stderr.write(_report(exc) + "\n")
        return 2
    except PhonotypoError as exc:
        sys.stderr.write(_report(exc) + "\n")
        return 1
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        sys.stderr.write(_report(exc, "InputError") + "\n")
        return 1
    except Exception as exc:  # noqa: BLE001 - never let a traceback escape
        log.debug("internal error", exc_info=True)
        sys.stderr.write(_report(exc, "InternalError") + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
