"""Caption metrics: corpus BLEU-n, ROUGE-L, CIDEr-D, and METEOR-lite.

All metrics tokenize with the dataset tokenizer. METEOR-lite keeps only
exact and suffix-stem matching (no synonymy), so its numbers are not
comparable with WordNet METEOR; the distinct name is deliberate.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from ..data.vocab import tokenize

_STEM_SUFFIXES = ("ing", "ed", "es", "s", "e")


def stem(token: str) -> str:
    """Tiny suffix-stripping stemmer; strips repeatedly while >=3 chars remain."""
    changed = True
    while changed:
        changed = False
        for suf in _STEM_SUFFIXES:
            if token.endswith(suf) and len(token) - len(suf) >= 3:
                token = token[: -len(suf)]
                changed = True
                break
    return token


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(cands: list[str], refs: list[list[str]], max_n: int = 4) -> list[float]:
    """Corpus BLEU-1..max_n: clipped precision, geometric mean, brevity penalty.

    No smoothing; a zero n-gram precision zeroes every BLEU-k with k >= n.
    """
    if len(cands) != len(refs):
        raise ValueError(f"{len(cands)} candidates vs {len(refs)} reference sets")
    if any(len(r) == 0 for r in refs):
        raise ValueError("every candidate needs at least one reference")
    matched = [0] * max_n
    total = [0] * max_n
    cand_len = 0
    ref_len = 0
    for cand, ref_group in zip(cands, refs):
        c_tok = tokenize(cand)
        r_toks = [tokenize(r) for r in ref_group]
        cand_len += len(c_tok)
        # closest reference length; ties resolved toward the shorter one
        ref_len += min((abs(len(r) - len(c_tok)), len(r)) for r in r_toks)[1]
        for n in range(1, max_n + 1):
            c_counts = _ngrams(c_tok, n)
            max_ref: Counter = Counter()
            for r in r_toks:
                for gram, cnt in _ngrams(r, n).items():
                    if cnt > max_ref[gram]:
                        max_ref[gram] = cnt
            matched[n - 1] += sum(min(cnt, max_ref[g]) for g, cnt in c_counts.items())
            total[n - 1] += sum(c_counts.values())
    if cand_len == 0:
        return [0.0] * max_n
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    precisions = [m / t if t > 0 else 0.0 for m, t in zip(matched, total)]
    scores = []
    for k in range(1, max_n + 1):
        if any(p == 0.0 for p in precisions[:k]):
            scores.append(0.0)
        else:
            scores.append(bp * math.exp(sum(math.log(p) for p in precisions[:k]) / k))
    return scores


def _lcs_len(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(cand: str, refs: list[str], beta: float = 1.2) -> float:
    """LCS F-measure; precision and recall are each maxed over references."""
    if not refs:
        raise ValueError("at least one reference required")
    c_tok = tokenize(cand)
    prec_max = 0.0
    rec_max = 0.0
    for ref in refs:
        r_tok = tokenize(ref)
        lcs = _lcs_len(c_tok, r_tok)
        if c_tok:
            prec_max = max(prec_max, lcs / len(c_tok))
        if r_tok:
            rec_max = max(rec_max, lcs / len(r_tok))
    if prec_max == 0.0 or rec_max == 0.0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * prec_max * rec_max / (rec_max + b2 * prec_max)


def _tfidf_vec(
    counts: Counter, doc_freq: Counter, log_n_images: float
) -> tuple[dict, float]:
    vec = {}
    norm_sq = 0.0
    for gram, cnt in counts.items():
        w = cnt * (log_n_images - math.log(max(1.0, doc_freq[gram])))
        vec[gram] = w
        norm_sq += w * w
    return vec, math.sqrt(norm_sq)


def cider_d(
    cands: list[str], refs: list[list[str]], max_n: int = 4, sigma: float = 6.0
) -> float:
    """CIDEr-D: clipped TF-IDF cosine over n=1..4 with a length penalty, x10."""
    if len(cands) != len(refs):
        raise ValueError(f"{len(cands)} candidates vs {len(refs)} reference sets")
    if len(cands) < 2:
        raise ValueError("cider_d needs a corpus of >= 2 images for a meaningful idf")
    if any(len(r) == 0 for r in refs):
        raise ValueError("every candidate needs at least one reference")
    cand_toks = [tokenize(c) for c in cands]
    ref_toks = [[tokenize(r) for r in group] for group in refs]
    log_n = math.log(float(len(cands)))
    doc_freq = [Counter() for _ in range(max_n)]
    for group in ref_toks:
        for n in range(1, max_n + 1):
            seen = set()
            for r in group:
                seen.update(_ngrams(r, n).keys())
            for gram in seen:
                doc_freq[n - 1][gram] += 1
    image_scores = []
    for c_tok, group in zip(cand_toks, ref_toks):
        per_n = [0.0] * max_n
        for n in range(1, max_n + 1):
            c_vec, c_norm = _tfidf_vec(_ngrams(c_tok, n), doc_freq[n - 1], log_n)
            acc = 0.0
            for r_tok in group:
                r_vec, r_norm = _tfidf_vec(_ngrams(r_tok, n), doc_freq[n - 1], log_n)
                val = 0.0
                for gram, w in c_vec.items():
                    # numerator clipped at the reference weight
                    val += min(w, r_vec.get(gram, 0.0)) * r_vec.get(gram, 0.0)
                if c_norm > 0 and r_norm > 0:
                    val /= c_norm * r_norm
                delta = len(c_tok) - len(r_tok)
                acc += val * math.exp(-(delta * delta) / (2 * sigma * sigma))
            per_n[n - 1] = 10.0 * acc / len(group)
        image_scores.append(sum(per_n) / max_n)
    return sum(image_scores) / len(image_scores)


def _align(c_tok: list[str], r_tok: list[str]) -> list[tuple[int, int]]:
    """Greedy left-to-right alignment: exact pass, then stem pass."""
    pairs: list[tuple[int, int]] = []
    used_c: set[int] = set()
    used_r: set[int] = set()
    for exact in (True, False):
        for i, ct in enumerate(c_tok):
            if i in used_c:
                continue
            key = ct if exact else stem(ct)
            for j, rt in enumerate(r_tok):
                if j in used_r:
                    continue
                if key == (rt if exact else stem(rt)):
                    pairs.append((i, j))
                    used_c.add(i)
                    used_r.add(j)
                    break
    return sorted(pairs)


def _chunks(pairs: list[tuple[int, int]]) -> int:
    if not pairs:
        return 0
    chunks = 1
    for (pi, pj), (ci, cj) in zip(pairs, pairs[1:]):
        if ci != pi + 1 or cj != pj + 1:
            chunks += 1
    return chunks


def meteor_lite(
    cand: str,
    refs: list[str],
    alpha: float = 0.9,
    beta: float = 3.0,
    gamma: float = 0.5,
) -> float:
    """Exact + suffix-stem METEOR variant; score is the max over references."""
    if not refs:
        raise ValueError("at least one reference required")
    c_tok = tokenize(cand)
    best = 0.0
    for ref in refs:
        r_tok = tokenize(ref)
        if not c_tok or not r_tok:
            continue
        pairs = _align(c_tok, r_tok)
        m = len(pairs)
        if m == 0:
            continue
        p = m / len(c_tok)
        r = m / len(r_tok)
        f_mean = p * r / (alpha * p + (1 - alpha) * r)
        penalty = gamma * (_chunks(pairs) / m) ** beta
        best = max(best, f_mean * (1 - penalty))
    return best


@dataclass
class MetricReport:
    miou: float | None = None
    bleu: list[float] = field(default_factory=list)
    rouge_l: float | None = None
    cider_d: float | None = None
    meteor_lite: float | None = None

    def to_dict(self) -> dict:
        return {
            "miou": self.miou,
            "bleu": list(self.bleu),
            "rouge_l": self.rouge_l,
            "cider_d": self.cider_d,
            "meteor_lite": self.meteor_lite,
        }


def evaluate_captions(cands: list[str], refs: list[list[str]]) -> MetricReport:
    """Corpus-level caption metrics; sentence metrics are averaged over images."""
    if not cands:
        raise ValueError("empty candidate list")
    report = MetricReport(bleu=bleu(cands, refs))
    report.rouge_l = sum(rouge_l(c, r) for c, r in zip(cands, refs)) / len(cands)
    report.meteor_lite = sum(meteor_lite(c, r) for c, r in zip(cands, refs)) / len(cands)
    if len(cands) >= 2:
        report.cider_d = cider_d(cands, refs)
    return report
