#!/usr/bin/env python3
"""Reference scorers used to freeze expected values for the metric tests.

Each scorer is written directly from its published definition:
  * BLEU-4: corpus-level modified n-gram precision with brevity penalty
    (Papineni et al., 2002), uniform 1..4-gram weights, no smoothing.
  * ROUGE-L: LCS-based F-measure (Lin, 2004) with beta = 1.
  * CIDEr-D: clipped TF-IDF cosine over 1..4-grams with a gaussian length
    penalty (sigma = 6), averaged over n and scaled by 10 (Vedantam et al.,
    2015; the "D" variant emitted by standard captioning scorers).

All scorers treat sentences as whitespace token lists. Run with no arguments
to regenerate tests/fixtures/metrics_fixture.json.
"""

import json
import math
import random
import sys
from collections import Counter
from pathlib import Path


def ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu4(candidates, references):
    match = [0] * 4
    total = [0] * 4
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        c = cand.split()
        r = ref.split()
        cand_len += len(c)
        ref_len += len(r)
        for n in range(1, 5):
            cc = ngrams(c, n)
            rc = ngrams(r, n)
            for gram, count in cc.items():
                total[n - 1] += count
                match[n - 1] += min(count, rc.get(gram, 0))
    if any(m == 0 for m in match) or any(t == 0 for t in total):
        return 0.0
    log_p = sum(0.25 * math.log(m / t) for m, t in zip(match, total))
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return 100.0 * bp * math.exp(log_p)


def lcs_len(a, b):
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l_f1(candidate, reference):
    c = candidate.split()
    r = reference.split()
    if not c or not r:
        return 0.0
    lcs = lcs_len(c, r)
    if lcs == 0:
        return 0.0
    p = lcs / len(c)
    rec = lcs / len(r)
    return 2 * p * rec / (p + rec)


def cider_d(candidates, references, sigma=6.0):
    num_docs = len(candidates)
    assert num_docs >= 2, "IDF needs a corpus"
    ref_tokens = [r.split() for r in references]
    doc_freq = Counter()
    for toks in ref_tokens:
        seen = set()
        for n in range(1, 5):
            seen.update(ngrams(toks, n).keys())
        doc_freq.update(seen)
    log_n = math.log(num_docs)

    def tfidf(counter):
        vec = {}
        norm = 0.0
        for gram, count in counter.items():
            idf = log_n - math.log(max(1.0, doc_freq.get(gram, 0.0)))
            w = count * idf
            vec[gram] = w
            norm += w * w
        return vec, math.sqrt(norm)

    total = 0.0
    for cand, rtoks in zip(candidates, ref_tokens):
        ctoks = cand.split()
        delta = len(ctoks) - len(rtoks)
        penalty = math.exp(-delta * delta / (2 * sigma * sigma))
        per_n = 0.0
        for n in range(1, 5):
            cv, cn = tfidf(ngrams(ctoks, n))
            rv, rn = tfidf(ngrams(rtoks, n))
            dot = sum(min(w, rv[g]) * rv[g] for g, w in cv.items() if g in rv)
            val = dot / (cn * rn) if cn > 0 and rn > 0 else 0.0
            per_n += val * penalty
        total += per_n / 4.0
    return 10.0 * total / num_docs


WORDS = {
    "subjects": ["the farmer", "a sailor", "the old keeper", "my neighbour", "the young girl",
                 "a tall man", "the boatman", "her brother", "the baker", "a quiet stranger"],
    "verbs": ["carried", "watched", "painted", "repaired", "followed", "greeted", "found",
              "dropped", "borrowed", "cleaned"],
    "objects": ["the wooden ladder", "a heavy basket", "the old lantern", "a small boat",
                "the copper kettle", "a broken fence", "the garden gate", "a silver mirror",
                "the round table", "a woollen blanket"],
    "tails": ["near the harbour", "before the storm", "after the market closed", "at dawn",
              "behind the stone wall", "in the lower meadow", "without any help",
              "during the festival", "by the river path", "under the bridge"],
}


def make_sentence(rng):
    return " ".join([rng.choice(WORDS["subjects"]), rng.choice(WORDS["verbs"]),
                     rng.choice(WORDS["objects"]), rng.choice(WORDS["tails"])])


def perturb(sentence, rng, strength):
    words = sentence.split()
    out = []
    for w in words:
        roll = rng.random()
        if roll < strength * 0.4:
            continue  # drop
        if roll < strength * 0.8:
            out.append(rng.choice(WORDS["verbs" if rng.random() < 0.5 else "tails"].copy()).split()[0])
        else:
            out.append(w)
    if not out:
        out = [rng.choice(WORDS["verbs"])]
    return " ".join(out)


def build_fixture(seed=20240801, n_pairs=50):
    rng = random.Random(seed)
    pairs = []
    for i in range(n_pairs):
        ref = make_sentence(rng)
        if i % 10 == 0:
            cand = ref  # identical
        elif i % 10 == 9:
            cand = make_sentence(rng)  # unrelated
        else:
            cand = perturb(ref, rng, strength=0.2 + 0.6 * rng.random())
        pairs.append({"candidate": cand, "reference": ref})
    return pairs


def main():
    fixture_path = Path(__file__).resolve().parent.parent / "fixtures" / "metrics_fixture.json"
    pairs = build_fixture()
    candidates = [p["candidate"] for p in pairs]
    references = [p["reference"] for p in pairs]
    per_pair_rouge = [rouge_l_f1(c, r) for c, r in zip(candidates, references)]
    expected = {
        "bleu4": corpus_bleu4(candidates, references),
        "rouge_l_mean": sum(per_pair_rouge) / len(per_pair_rouge),
        "per_pair_rouge": per_pair_rouge,
        "cider": cider_d(candidates, references),
    }
    fixture_path.parent.mkdir(parents=True, exist_ok=True)
    fixture_path.write_text(json.dumps({"pairs": pairs, "expected": expected}, indent=1) + "\n")
    print(f"wrote {fixture_path}")
    print(json.dumps(expected["bleu4"]), json.dumps(expected["rouge_l_mean"]),
          json.dumps(expected["cider"]))


if __name__ == "__main__":
    sys.exit(main())
