"""Slow, obviously-correct reference implementations used as test oracles.

None of these share code with the package beyond plain data access.
"""

import csv
import gzip
import io
import itertools
import math
import unicodedata

import numpy as np


def brute_force_decode(dense, switch_penalty=0.0, min_duration=1, tie_tol=1e-9):
    """Enumerate every labeling of a (T, S) score array.

    ``-inf`` entries are unusable arcs. Returns (best score, labels) with
    the lexicographically smallest labeling among totals within ``tie_tol``
    of the maximum, or (-inf, None).
    """
    dense = np.asarray(dense, dtype=float)
    T, S = dense.shape
    totals = []
    for labels in itertools.product(range(S), repeat=T):   # lexicographic order
        total = 0.0
        ok = True
        run = 0
        for t, s in enumerate(labels):
            if dense[t, s] == -math.inf:
                ok = False
                break
            total += dense[t, s]
            if t > 0 and s != labels[t - 1]:
                total -= switch_penalty
                if run < min_duration:
                    ok = False
                    break
                run = 1
            else:
                run += 1
        if not ok or run < min_duration:
            continue
        totals.append((labels, total))
    if not totals:
        return -math.inf, None
    best = max(t for _, t in totals)
    labels = next(lab for lab, t in totals if t >= best - tie_tol * max(1.0, abs(best)))
    return best, labels


def frame_score(posteriors, signs, eps=1e-6):
    """Direct per-frame segment score from a +1/-1/0 sign list."""
    terms = []
    for p, s in zip(posteriors, signs):
        p = min(max(float(p), eps), 1 - eps)
        if s > 0:
            terms.append(math.log(p))
        elif s < 0:
            terms.append(math.log(1 - p))
    return sum(terms) / len(terms) if terms else 0.0


def exhaustive_best_subset(score_fn, glyphs):
    """Best non-empty subset of ``glyphs`` under ``score_fn(frozenset) -> float``.

    Returns (best score, list of all subsets reaching it).
    """
    best, winners = -math.inf, []
    for r in range(1, len(glyphs) + 1):
        for combo in itertools.combinations(sorted(glyphs), r):
            sc = score_fn(frozenset(combo))
            if sc > best:
                best, winners = sc, [frozenset(combo)]
            elif sc == best:
                winners.append(frozenset(combo))
    return best, winners


def central_difference(f, x, h=1e-5):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def recount_phoible(path):
    """Line-level recount of a PHOIBLE long-format file with the csv module."""
    raw = open(path, "rb").read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    reader = csv.DictReader(io.StringIO(raw.decode("utf-8-sig"), newline=""))
    inventories, languages, glyphs = set(), set(), set()
    members = {}
    rows = 0
    for row in reader:
        rows += 1
        inv = row["InventoryID"].strip()
        inventories.add(inv)
        languages.add(row["LanguageName"].strip().casefold())
        g = unicodedata.normalize("NFD", row["Phoneme"].strip())
        glyphs.add(g)
        members.setdefault(inv, set()).add(g)
    attestation = {}
    for gs in members.values():
        for g in gs:
            attestation[g] = attestation.get(g, 0) + 1
    return {"rows": rows, "inventories": len(inventories), "languages": len(languages),
            "segments": len(glyphs), "attestation": attestation, "members": members}
