# SPDX-License-Identifier: Apache-2.0
"""Independent re-implementation of the deterministic offline pipeline.

Recomputes synthetic generation, agent rankings and mean recall from the
fixtures with exact fractions, without touching the C++ code.
"""

import json
import re
import sys
from fractions import Fraction
from pathlib import Path

STOPWORDS = set(
    """a about across all an and any are as at be by can could data dataset datasets do find for from get give
    have how i in into is it looking me my need of on or over please show some that the their there these this
    to used using want was we were what where which with would you""".split()
)

PAGE_SIZE = 10


def tokens(text):
    return re.findall(r"[a-z0-9]+", text.lower())


def content_words(text):
    out = []
    for t in tokens(text):
        if t not in STOPWORDS and t not in out:
            out.append(t)
    return out


def load_jsonl(path):
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            rows.append(json.loads(line))
    return rows


class Catalog:
    def __init__(self, records):
        self.records = sorted(records, key=lambda r: r["concept_id"])
        self.words = [
            set(tokens(" ".join([r["short_name"], r["title"], r["summary"]]))) for r in self.records
        ]

    def search(self, keyword, page_size=PAGE_SIZE):
        q = set(tokens(keyword))
        scored = []
        for rec, words in zip(self.records, self.words):
            s = len(q & words)
            if s > 0:
                scored.append((-s, rec["concept_id"]))
        scored.sort()
        return [cid for _, cid in scored[:page_size]]


def draft_query(text, attempt):
    words = content_words(text)
    if not words:
        return "earth science data"
    first = (attempt * 4) % len(words)
    return "Find datasets on " + " ".join(words[first : first + 6])


def generate(corpus, catalog, max_attempts=5, page_size=PAGE_SIZE):
    queries, discards = [], []
    pairs = sorted((d["doc_id"], cid, d["text"]) for d in corpus for cid in set(d["cited_ids"]))
    for doc_id, cid, text in pairs:
        for attempt in range(max_attempts):
            q = draft_query(text, attempt)
            if cid in catalog.search(q, page_size):
                queries.append({"query_id": f"syn-{doc_id}-{cid}", "text": q, "expected_ids": [cid]})
                break
        else:
            discards.append({"doc_id": doc_id, "cited_id": cid})
    return queries, discards


def run_agent(query, catalog, keywords, broaden, k):
    words = content_words(query)
    keyword = " ".join(words) if keywords and words else query
    results = [catalog.search(keyword)]
    if not results[0] and broaden and len(words) > 2:
        results.append(catalog.search(" ".join(words[:2])))
    ranked = []
    for r in results:
        for cid in r:
            if cid not in ranked:
                ranked.append(cid)
    return ranked[:k]


def recall(expected, ranked, k):
    return Fraction(len(set(expected) & set(ranked[:k])), len(set(expected)))


def mean_recall(queries, catalog, keywords, broaden, ks=(1, 3, 5)):
    out = {}
    kmax = max(ks)
    rankings = {q["query_id"]: run_agent(q["text"], catalog, keywords, broaden, kmax) for q in queries}
    for k in ks:
        total = sum((recall(q["expected_ids"], rankings[q["query_id"]], k) for q in queries), Fraction(0))
        out[k] = total / len(queries)
    return out


def percent(fr):
    tenths = (fr.numerator * 2000 + fr.denominator) // (2 * fr.denominator)
    return f"{tenths // 10}.{tenths % 10}"


def expected_means(root):
    """Exact mean recall ("num/den") per gate, agent and k for the fixture pipeline."""
    cat = Catalog(load_jsonl(root / "fixtures" / "cmr_catalog.jsonl"))
    syn, discards = generate(load_jsonl(root / "fixtures" / "corpus.jsonl"), cat)
    gold = [r for r in load_jsonl(root / "fixtures" / "gold_benchmark.jsonl") if "_meta" not in r]
    out = {"synthetic_queries": len(syn), "discards": len(discards)}
    for gate, qs in (("synthetic", syn), ("gold", gold)):
        for name, kw, br in (("cmr_care_v1", True, True), ("cmr_simple", False, False)):
            out.setdefault(gate, {})[name] = {str(k): f"{v.numerator}/{v.denominator}" for k, v in mean_recall(qs, cat, kw, br).items()}
    return out


if __name__ == "__main__":
    args = [a for a in sys.argv[1:] if a != "--json"]
    root = Path(args[0]) if args else Path(__file__).resolve().parents[2]
    if "--json" in sys.argv:
        print(json.dumps(expected_means(root), sort_keys=True))
        sys.exit(0)
    cat = Catalog(load_jsonl(root / "fixtures" / "cmr_catalog.jsonl"))
    corpus = load_jsonl(root / "fixtures" / "corpus.jsonl")
    qs, ds = generate(corpus, cat)
    for q in qs:
        print(q["query_id"], "|", q["text"])
    print("discards:", ds)
    for name, kw, br in (("care", True, True), ("simple", False, False)):
        m = mean_recall(qs, cat, kw, br)
        print(name, {k: percent(v) for k, v in m.items()})
