"""Token error rates, error-rate histograms, tagging metrics and run statistics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from scipy import stats as _stats

from .align import align_words, pair_error_counts
from .corpus import Dataset, LabeledSentence, ParallelCorpus, split_label
from .noise import NUM_BINS, rate_bin


class MetricError(ValueError):
    pass


class EmptyDenominatorWarning(UserWarning):
    pass


def _fold(s: str, fold_case: bool) -> str:
    return s.casefold() if fold_case else s


def _scored(d: Dataset):
    for s in d.sentences:
        if s.is_docstart:
            continue
        if not s.source_tokens:
            raise MetricError("token error rate needs source tokens on every sentence")
        yield s


def sentence_error_counts(s: LabeledSentence, fold_case: bool = False,
                          entities_only: bool = False) -> tuple[int, int]:
    """(erroneous, total) tokens; dropped clean tokens count as erroneous."""
    errors = total = 0
    for tok, src, label in zip(s.tokens, s.source_tokens, s.labels):
        if entities_only and label == "O":
            continue
        total += 1
        errors += _fold(tok, fold_case) != _fold(src, fold_case)
    if not entities_only:
        errors += s.dropped
        total += s.dropped
    return errors, total


def token_error_rate(noisy: Dataset, fold_case: bool = False) -> float:
    errors = total = 0
    for s in _scored(noisy):
        e, t = sentence_error_counts(s, fold_case)
        errors += e
        total += t
    return errors / total if total else 0.0


def entity_token_error_rate(noisy: Dataset, fold_case: bool = False) -> float:
    """Token error rate over tokens with a non-O gold label.

    With no entity tokens at all, returns 0.0 and emits EmptyDenominatorWarning.
    """
    errors = total = 0
    for s in _scored(noisy):
        e, t = sentence_error_counts(s, fold_case, entities_only=True)
        errors += e
        total += t
    if not total:
        warnings.warn("no entity tokens; entity TER defined as 0", EmptyDenominatorWarning)
        return 0.0
    return errors / total


def parallel_error_counts(p: ParallelCorpus, fold_case: bool = False) -> list[tuple[int, int]]:
    return [pair_error_counts(_fold(c, fold_case), _fold(n, fold_case)) for c, n in p.pairs]


def parallel_token_error_rate(p: ParallelCorpus, fold_case: bool = False) -> float:
    counts = parallel_error_counts(p, fold_case)
    total = sum(t for _, t in counts)
    return sum(e for e, _ in counts) / total if total else 0.0


def correction_accuracy(noisy: Dataset, corrected: Dataset, fold_case: bool = False) -> float:
    """Share of erroneous noisy tokens whose corrected form equals the clean token.

    Sentences whose token counts differ are re-aligned word by word; a noisy
    token inside a merged group counts as restored only if the whole group
    matches its clean tokens.
    """
    noisy_s = [s for s in noisy.sentences if not s.is_docstart]
    corr_s = [s for s in corrected.sentences if not s.is_docstart]
    if len(noisy_s) != len(corr_s):
        raise MetricError(f"{len(noisy_s)} noisy vs {len(corr_s)} corrected sentences")
    erroneous = restored = 0
    for ns, cs in zip(noisy_s, corr_s):
        if not ns.source_tokens:
            raise MetricError("correction accuracy needs source tokens")
        f = lambda x: _fold(x, fold_case)  # noqa: E731
        if len(ns) == len(cs):
            images = list(cs.tokens)
        else:
            images = _corrected_images(ns, cs)
        for tok, src, img in zip(ns.tokens, ns.source_tokens, images):
            if f(tok) != f(src):
                erroneous += 1
                restored += img is not None and f(img) == f(src)
    return restored / erroneous if erroneous else 0.0


def _corrected_images(ns: LabeledSentence, cs: LabeledSentence) -> list[Optional[str]]:
    """Corrected text aligned to each noisy token (None inside merged groups)."""
    images: list = []
    for noisy_part, corr_part in align_words(ns.text, cs.text).pairs:
        if not noisy_part:
            continue
        n = len(noisy_part.split())
        if n == 1:
            images.append(corr_part)
        else:
            images.extend([None] * n)
    if len(images) != len(ns):
        raise MetricError("shape mismatch after re-alignment")
    return images


# -- histograms ---------------------------------------------------------------

@dataclass(frozen=True)
class ErrorHistogram:
    """Percentage of sentences per 10-point token-error-rate bin.

    ``bins[i]`` covers rates in [10*i, 10*(i+1)) percent; the last bin is
    closed at 100.
    """
    bins: tuple[float, ...]
    n_sentences: int

    @property
    def labels(self) -> list[int]:
        return [10 * (i + 1) for i in range(NUM_BINS)]

    def to_csv(self) -> str:
        lines = ["bin,percentage"]
        lines += [f"{n},{v:.6f}" for n, v in zip(self.labels, self.bins)]
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {"bins": self.labels, "percentage": list(self.bins),
                "n_sentences": self.n_sentences}


def histogram_from_rates(rates: Iterable[float]) -> ErrorHistogram:
    counts = [0] * NUM_BINS
    n = 0
    for r in rates:
        counts[rate_bin(r)] += 1
        n += 1
    if not n:
        raise MetricError("empty corpus")
    return ErrorHistogram(tuple(100.0 * c / n for c in counts), n)


def sentence_error_rates(data, fold_case: bool = False) -> list[float]:
    if isinstance(data, ParallelCorpus):
        counts = parallel_error_counts(data, fold_case)
    else:
        counts = [sentence_error_counts(s, fold_case) for s in _scored(data)]
    return [e / t if t else 0.0 for e, t in counts]


def error_rate_histogram(data, fold_case: bool = False) -> ErrorHistogram:
    """Histogram of per-sentence token error rates of a noisy Dataset or ParallelCorpus."""
    return histogram_from_rates(sentence_error_rates(data, fold_case))


# -- tagging metrics ----------------------------------------------------------

def extract_spans(labels: Sequence[str]) -> set:
    """Entity spans as (type, start, end_inclusive); an I-X opening a span counts as B-X."""
    spans = set()
    start = typ = None
    for i, label in enumerate(labels):
        prefix, t = split_label(label)
        if typ is not None and (prefix != "I" or t != typ):
            spans.add((typ, start, i - 1))
            typ = None
        if prefix != "O" and typ is None:
            start, typ = i, t
    if typ is not None:
        spans.add((typ, start, len(labels) - 1))
    return spans


def span_counts(gold: Sequence[str], pred: Sequence[str]) -> tuple[int, int, int]:
    """(true positives, false positives, false negatives) of exact span matches."""
    if len(gold) != len(pred):
        raise MetricError(f"length mismatch: {len(gold)} gold vs {len(pred)} predicted labels")
    g = extract_spans(gold)
    p = extract_spans(pred)
    tp = len(g & p)
    return tp, len(p) - tp, len(g) - tp


def _pairs(gold: Dataset, pred: Dataset):
    if len(gold) != len(pred):
        raise MetricError(f"{len(gold)} gold vs {len(pred)} predicted sentences")
    for i, (g, p) in enumerate(zip(gold.sentences, pred.sentences)):
        if len(g) != len(p):
            raise MetricError(f"sentence {i}: {len(g)} gold vs {len(p)} predicted tokens")
        yield g, p


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def prf_from_counts(tp: int, fp: int, fn: int) -> PRF:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return PRF(p, r, f, tp, fp, fn)


def ner_scores(gold: Dataset, pred: Dataset) -> PRF:
    tp = fp = fn = 0
    for g, p in _pairs(gold, pred):
        a, b, c = span_counts(g.labels, p.labels)
        tp += a
        fp += b
        fn += c
    return prf_from_counts(tp, fp, fn)


def ner_f1(gold: Dataset, pred: Dataset) -> float:
    """Entity-level micro-averaged F1 over exact (type, start, end) matches."""
    return ner_scores(gold, pred).f1


def tagging_accuracy(gold: Dataset, pred: Dataset) -> float:
    correct = total = 0
    for g, p in _pairs(gold, pred):
        correct += sum(a == b for a, b in zip(g.labels, p.labels))
        total += len(g)
    return correct / total if total else 0.0


# -- run statistics -----------------------------------------------------------

@dataclass(frozen=True)
class EvalSummary:
    mean: float
    stddev: float
    n_runs: int

    def __str__(self):
        return f"{self.mean:.2f} ± {self.stddev:.2f}"


def mean_stddev(xs: Sequence[float]) -> EvalSummary:
    xs = [float(x) for x in xs]
    if not xs:
        raise MetricError("mean_stddev of an empty list")
    n = len(xs)
    mean = math.fsum(xs) / n
    if n == 1:
        return EvalSummary(mean, 0.0, 1)
    var = math.fsum((x - mean) ** 2 for x in xs) / (n - 1)
    return EvalSummary(mean, math.sqrt(var), n)


@dataclass(frozen=True)
class WelchResult:
    t: float
    p: float
    df: float
    degenerate: bool = False

    def __iter__(self):
        return iter((self.t, self.p))


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    """Two-sided Welch's t-test with Welch-Satterthwaite degrees of freedom.

    Unpacks as ``t, p``. Two zero-variance samples give p=1 for equal means
    and p=0 (``degenerate=True``) otherwise.
    """
    if len(a) < 2 or len(b) < 2:
        raise MetricError("welch_t_test needs at least two values per sample")
    sa, sb = mean_stddev(a), mean_stddev(b)
    va = sa.stddev ** 2 / sa.n_runs
    vb = sb.stddev ** 2 / sb.n_runs
    diff = sa.mean - sb.mean
    if va + vb == 0:
        if diff == 0:
            return WelchResult(0.0, 1.0, float("nan"), True)
        return WelchResult(math.copysign(math.inf, diff), 0.0, float("nan"), True)
    t = diff / math.sqrt(va + vb)
    # shares of the pooled variance; avoids underflow when squaring tiny variances
    ra, rb = va / (va + vb), vb / (va + vb)
    df = 1.0 / (ra ** 2 / (sa.n_runs - 1) + rb ** 2 / (sb.n_runs - 1))
    p = 2.0 * _stats.t.sf(abs(t), df)
    return WelchResult(t, min(1.0, float(p)), df)
