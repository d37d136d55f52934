#!/usr/bin/env python3
"""Recomputes tests/fixtures/golden/ranking_golden.json from scratch.

Independent of the C++ code: tokens are ASCII lowercase runs of [a-z0-9_],
which agrees with ICU word segmentation on the ASCII-only fixture below.
"""
import json
import math
import re
import sys

STEM = "a patient reports vertical double vision and a head tilt after trauma"
OPTIONS = [
    ("A", "oculomotor nerve palsy"),
    ("B", "fourth nerve palsy"),
    ("C", "abducens nerve palsy"),
    ("D", "optic neuritis"),
]
GRAPHS = [
    ("diplopia", [
        ("diplopia", "may_be_caused_by", "fourth nerve palsy"),
        ("diplopia", "isa", "visual disturbance"),
        ("double vision", "synonym_of", "diplopia"),
    ]),
    ("fourth nerve palsy", [
        ("fourth nerve palsy", "causes", "vertical double vision"),
        ("fourth nerve palsy", "associated_with", "head tilt"),
        ("fourth nerve palsy", "isa", "cranial nerve palsy"),
    ]),
]
DIM = 64


def tokens(s):
    return re.findall(r"[a-z0-9_]+", s.lower())


def fnv1a64(s):
    h = 0xCBF29CE484222325
    for byte in s.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def embed(s):
    v = [0] * DIM
    for t in tokens(s):
        v[fnv1a64(t) % DIM] += 1
    return v


def cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


def jaccard(a, b):
    sa, sb = set(tokens(a)), set(tokens(b))
    if not sa and not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


def main():
    q = embed(STEM)
    rows = []
    for g, (_, triples) in enumerate(GRAPHS):
        for p, t in enumerate(triples):
            rows.append((cosine(q, embed(" ".join(t))), g, p, t))
    embed_order = sorted(rows, key=lambda r: (-r[0], r[1], r[2]))

    query = STEM + "\n" + "\n".join(f"{l}) {t}" for l, t in OPTIONS)
    crossed = [(jaccard(query, " ".join(r[3])), r[1], r[2], r[3]) for r in embed_order]
    cross_order = sorted(crossed, key=lambda r: (-r[0], r[1], r[2]))[:3]

    out = {
        "stem": STEM,
        "options": [{"label": l, "text": t} for l, t in OPTIONS],
        "graphs": [{"entity_key": k, "triples": [list(t) for t in ts]} for k, ts in GRAPHS],
        "embed_order": [{"graph": g, "position": p, "score": s} for s, g, p, _ in embed_order],
        "cross_top3": [{"graph": g, "position": p, "score": s} for s, g, p, _ in cross_order],
    }
    json.dump(out, sys.stdout, indent=1, ensure_ascii=False)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
