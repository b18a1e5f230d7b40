"""Corpus production: parallel data, noisy benchmarks, misspellings, augmentation, correction."""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import _process
from ._util import make_rng, ordered_map
from .align import transfer
from .corpus import (
    Dataset,
    LabeledSentence,
    ParallelCorpus,
    ValidationError,
    check_token,
    has_placeholder,
)
from .metrics import entity_token_error_rate, token_error_rate
from .noise import (
    DEFAULT_ALPHABET,
    Alphabet,
    ExternalGenerator,
    IntensityDistribution,
    external_generate,
    load_model,
    perturb,
    perturb_token,
)

log = logging.getLogger(__name__)


@dataclass
class Report:
    n_input: int = 0
    n_output: int = 0
    skipped: list = field(default_factory=list)  # (index, reason)
    extra: dict = field(default_factory=dict)

    def skip(self, index: int, reason: str) -> None:
        log.warning("skipping sentence %d: %s", index, reason)
        self.skipped.append((index, reason))

    def to_json(self) -> dict:
        return {"input": self.n_input, "output": self.n_output,
                "skip_count": len(self.skipped),
                "skipped": [{"index": i, "reason": r} for i, r in self.skipped],
                **self.extra}


# -- degraders ----------------------------------------------------------------

# Visually similar glyph swaps typical for OCR output.
OCR_CONFUSIONS = {
    "rn": ["m"], "m": ["rn", "nn"], "cl": ["d"], "d": ["cl"], "vv": ["w"], "w": ["vv"],
    "ri": ["n"], "n": ["ri", "h"], "h": ["b", "li"], "b": ["h", "6"],
    "l": ["1", "I", "i"], "I": ["l", "1"], "1": ["l", "I"], "i": ["l", "1", "j"],
    "O": ["0", "Q"], "0": ["O", "o"], "o": ["0", "c", "a"], "a": ["o", "e"],
    "e": ["c", "o"], "c": ["e", "o"], "u": ["v", "n"], "v": ["u", "y"], "y": ["v"],
    "S": ["5", "8"], "5": ["S"], "B": ["8", "3"], "8": ["B"], "g": ["q", "9"],
    "q": ["g"], "f": ["t"], "t": ["f", "l"], "E": ["F"], "F": ["E", "P"],
    "P": ["F"], "Z": ["2"], "2": ["Z"], "G": ["6", "C"], "C": ["G", "("],
    ".": [",", ""], ",": [".", ""], "'": ["`", ""], "-": ["~", ""],
}


class Degrader:
    """Maps each sentence to one noisy sentence; failures are per sentence."""

    def run(self, sentences: Sequence[str], jobs: int = 1) -> list:
        """One output per input: a string, or an Exception describing the failure."""
        raise NotImplementedError


class IdentityDegrader(Degrader):
    def run(self, sentences, jobs=1):
        return list(sentences)


def _call_indexed(fn, item):
    index, text = item
    try:
        return fn(index, text)
    except (ValueError, RuntimeError) as e:
        return e


@dataclass
class ModelDegrader(Degrader):
    """Noise from an error model, seeded per sentence by (seed, index)."""
    model: object
    seed: int = 0

    def _one(self, index, text):
        return perturb(self.model, text, (self.seed, index))

    def run(self, sentences, jobs=1):
        if isinstance(self.model, ExternalGenerator):
            return external_generate(self.model, list(sentences))
        return ordered_map(functools.partial(_call_indexed, self._one),
                           list(enumerate(sentences)), jobs)


@dataclass
class BuiltinDegrader(Degrader):
    """Offline stand-in for rendering + OCR.

    Each sentence draws a token error rate from `intensity`; every token is
    then corrupted with that probability by one or two character edits,
    mostly glyph confusions from `table` and a `uniform_noise` share of
    random substitutions, insertions and deletions. A corrupted token always
    differs from the original and never gains whitespace.
    """
    intensity: IntensityDistribution
    table: dict = field(default_factory=lambda: dict(OCR_CONFUSIONS))
    seed: int = 0
    uniform_noise: float = 0.2
    alphabet: Alphabet = DEFAULT_ALPHABET

    def _edit(self, tok: str, rng) -> str:
        if rng.random() >= self.uniform_noise:
            sites = [(i, src) for src in self.table for i in _find_all(tok, src)]
            if sites:
                sites.sort()
                i, src = sites[rng.randrange(len(sites))]
                repl = self.table[src][rng.randrange(len(self.table[src]))]
                return tok[:i] + repl + tok[i + len(src):]
        chars = self.alphabet.chars
        kind = rng.randrange(3)
        if kind == 0 or not tok:
            i = rng.randrange(len(tok) + 1)
            return tok[:i] + chars[rng.randrange(len(chars))] + tok[i:]
        i = rng.randrange(len(tok))
        if kind == 1:
            return tok[:i] + tok[i + 1:]
        return tok[:i] + chars[rng.randrange(len(chars))] + tok[i + 1:]

    def corrupt_token(self, tok: str, rng) -> str:
        for _ in range(10):
            out = tok
            for _ in range(1 + (rng.random() < 0.3)):
                out = self._edit(out, rng)
            if out and out != tok and not any(ch.isspace() for ch in out) \
                    and not has_placeholder(out):
                return out
        return tok + self.alphabet.chars[rng.randrange(len(self.alphabet))]

    def _one(self, index, text):
        rng = make_rng(self.seed, index)
        rate = self.intensity.sample(rng)
        if rate <= 0:
            return " ".join(text.split())
        return " ".join(self.corrupt_token(t, rng) if rng.random() < rate else t
                        for t in text.split())

    def run(self, sentences, jobs=1):
        return ordered_map(functools.partial(_call_indexed, self._one),
                           list(enumerate(sentences)), jobs)


def _find_all(s: str, sub: str):
    i = s.find(sub)
    while i >= 0:
        yield i
        i = s.find(sub, i + 1)


def builtin_degrader(intensity: IntensityDistribution, table: Optional[dict] = None,
                     seed: int = 0, **kwargs) -> BuiltinDegrader:
    return BuiltinDegrader(intensity, dict(OCR_CONFUSIONS if table is None else table),
                           seed, **kwargs)


@dataclass
class ExternalDegrader(Degrader):
    """A render+OCR pipeline (or anything else) behind the plain-text line protocol."""
    command: object
    timeout: float = 3600.0

    def run(self, sentences, jobs=1):
        outputs = _process.run_lines(self.command, list(sentences), self.timeout)
        results = []
        for out in outputs:
            if "\t" in out or has_placeholder(out):
                results.append(ValidationError(f"degrader output unusable: {out!r}"))
            else:
                results.append(out)
        return results


def degrader_from_config(cfg: dict, seed: int = 0) -> Degrader:
    """Build a degrader from its JSON description.

    ``{"kind": "identity"}``, ``{"kind": "builtin", "intensity": {...},
    "uniform_noise": 0.2, "table": {...}}``, ``{"kind": "model", "model":
    "path.json"}`` or ``{"kind": "external", "command": [...], "timeout": 600}``.
    """
    kind = cfg.get("kind", "identity")
    seed = cfg.get("seed", seed)
    if kind == "identity":
        return IdentityDegrader()
    if kind == "builtin":
        intensity = IntensityDistribution.from_dict(cfg.get("intensity", {"kind": "constant", "rate": 0.15}))
        kwargs = {}
        if "uniform_noise" in cfg:
            kwargs["uniform_noise"] = cfg["uniform_noise"]
        if "alphabet" in cfg:
            kwargs["alphabet"] = Alphabet(tuple(cfg["alphabet"]))
        return builtin_degrader(intensity, cfg.get("table"), seed, **kwargs)
    if kind == "model":
        model = cfg["model"]
        if isinstance(model, str):
            model = load_model(model)
        return ModelDegrader(model, seed)
    if kind == "external":
        return ExternalDegrader(cfg["command"], cfg.get("timeout", 3600.0))
    raise ValueError(f"unknown degrader kind {kind!r}")


# -- operations ---------------------------------------------------------------

def generate_parallel(seed_corpus: Sequence[str], d: Degrader, jobs: int = 1):
    """Pair every seed sentence with its degraded version; returns (corpus, report)."""
    seed_corpus = list(seed_corpus)
    for s in seed_corpus:
        if has_placeholder(s):
            raise ValidationError(f"seed sentence contains a reserved placeholder: {s!r}")
    outputs = d.run(seed_corpus, jobs)
    report = Report(n_input=len(seed_corpus))
    pairs = []
    for i, (s, out) in enumerate(zip(seed_corpus, outputs)):
        if isinstance(out, Exception):
            report.skip(i, str(out))
            continue
        pairs.append((s, out))
    report.n_output = len(pairs)
    return ParallelCorpus(pairs), report


def _passthrough(s: LabeledSentence) -> LabeledSentence:
    return LabeledSentence(s.tokens, s.labels, s.tokens)


def synth_benchmark(d: Dataset, deg: Degrader, jobs: int = 1):
    """Degrade every sentence's text and transfer its labels; returns (dataset, report).

    Document separators pass through untouched.
    """
    idx = [i for i, s in enumerate(d.sentences) if not s.is_docstart]
    outputs = deg.run([d.sentences[i].text for i in idx], jobs)
    by_index = dict(zip(idx, outputs))
    report = Report(n_input=len(d))
    out = []
    dropped = 0
    for i, s in enumerate(d.sentences):
        if s.is_docstart:
            out.append(_passthrough(s))
            continue
        noisy = by_index[i]
        if isinstance(noisy, Exception):
            report.skip(i, str(noisy))
            continue
        if not noisy.split():
            report.skip(i, "degrader produced an empty sentence")
            continue
        try:
            t = transfer(s, noisy)
        except (ValueError, AssertionError) as e:
            report.skip(i, f"alignment failed: {e}")
            continue
        dropped += t.sentence.dropped
        out.append(t.sentence)
    result = Dataset(out)
    report.n_output = len(result)
    has_tokens = any(not s.is_docstart for s in result.sentences)
    report.extra = {"ter": token_error_rate(result) if has_tokens else 0.0,
                    "dropped_tokens": dropped}
    if has_tokens and any(l != "O" for s in result for l in s.labels):
        report.extra["entity_ter"] = entity_token_error_rate(result)
    return result, report


# -- misspellings -------------------------------------------------------------

class MisspellingTable(dict):
    """word -> list of replacement candidates."""

    def __init__(self, entries=()):
        super().__init__()
        self.merge(dict(entries))

    def merge(self, other: dict) -> "MisspellingTable":
        """Concatenate candidate lists; duplicates are kept once, first occurrence wins."""
        for word, cands in other.items():
            current = self.setdefault(word, [])
            for c in cands:
                check_token(c)
                if c not in current:
                    current.append(c)
        return self


def parse_misspelling_table(text: str) -> MisspellingTable:
    """Lines of ``word<TAB>candidate [candidate ...]`` (candidates split on whitespace)."""
    table = MisspellingTable()
    for lineno, line in enumerate(text.split("\n"), 1):
        if not line.strip():
            continue
        word, sep, rest = line.partition("\t")
        if not sep:
            parts = line.split()
            word, cands = parts[0], parts[1:]
        else:
            cands = rest.split()
        if not cands:
            raise ValueError(f"line {lineno}: no candidates for {word!r}")
        table.merge({word.strip(): cands})
    return table


def induce_misspellings(d: Dataset, t: dict, p_replace: float, seed: int = 0) -> Dataset:
    """Replace tokens found in `t`, each independently with probability `p_replace`.

    Labels and token count never change. Sentences without source tokens get
    their original tokens as the clean side.
    """
    if not 0.0 <= p_replace <= 1.0:
        raise ValueError(f"p_replace must be in [0, 1], got {p_replace}")
    out = []
    for i, s in enumerate(d.sentences):
        if s.is_docstart:
            out.append(_passthrough(s) if not s.source_tokens else s)
            continue
        rng = make_rng(seed, i)
        tokens = list(s.tokens)
        for j, tok in enumerate(tokens):
            cands = t.get(tok)
            if cands and rng.random() < p_replace:
                tokens[j] = cands[rng.randrange(len(cands))]
        out.append(LabeledSentence(tokens, s.labels, s.source_tokens or s.tokens,
                                   dropped=s.dropped))
    return Dataset(out)


# -- augmentation -------------------------------------------------------------

def _augment_one(model, base_seed, epoch, level, item):
    i, s = item
    if s.is_docstart:
        return _passthrough(s)
    if level == "token":
        tokens = []
        for j, tok in enumerate(s.tokens):
            new = "".join(perturb_token(model, tok, (base_seed, epoch, i, j)).split())
            tokens.append(new or tok)
        return LabeledSentence(tokens, s.labels, s.tokens)
    noisy = perturb(model, s.text, (base_seed, epoch, i))
    return _relabel(s, noisy)


def _relabel(s: LabeledSentence, noisy: str) -> LabeledSentence:
    if not noisy.split():
        return _passthrough(s)
    return transfer(s, noisy).sentence


def augmentation_stream(d: Dataset, model, base_seed: int, epoch: int,
                        level: str = "sentence", jobs: int = 1) -> Dataset:
    """Noisy copy of `d` for one training epoch.

    Sentence i of epoch e is noised with the stream (base_seed, e, i), so an
    epoch is reproducible and different epochs differ. A sentence noised
    away completely is kept clean.
    """
    if level not in ("sentence", "token"):
        raise ValueError(f"level must be 'sentence' or 'token', got {level!r}")
    if isinstance(model, ExternalGenerator):
        gen = ExternalGenerator(model.command, level, model.timeout)
        idx = [i for i, s in enumerate(d.sentences) if not s.is_docstart]
        noisy = dict(zip(idx, external_generate(gen, [d.sentences[i].text for i in idx])))
        return Dataset(_passthrough(s) if s.is_docstart else _relabel(s, noisy[i])
                       for i, s in enumerate(d.sentences))
    fn = functools.partial(_augment_one, model, base_seed, epoch, level)
    return Dataset(ordered_map(fn, list(enumerate(d.sentences)), jobs))


# -- correction ---------------------------------------------------------------

def apply_corrector(cmd, d: Dataset, timeout: float = 3600.0):
    """Run a text corrector over each sentence and re-attach labels; returns (dataset, report).

    Sentences travel as plain text, one per line. Corrected tokens take the
    labels and clean counterparts of the noisy tokens they align to.
    """
    idx = [i for i, s in enumerate(d.sentences) if not s.is_docstart]
    outputs = _process.run_lines(cmd, [d.sentences[i].text for i in idx], timeout)
    corrected = dict(zip(idx, outputs))
    report = Report(n_input=len(d))
    out = []
    for i, s in enumerate(d.sentences):
        if s.is_docstart:
            out.append(s)
            continue
        line = corrected[i]
        if not line.split() or has_placeholder(line):
            report.skip(i, "unusable corrector output; sentence kept uncorrected")
            out.append(s)
            continue
        t = transfer(s, line)
        src = s.source_tokens or s.tokens
        sources = [src[k] if k is not None and here else ""
                   for k, here in zip(t.origin, t.sentence.source_tokens)]
        lost = sum(1 for k in t.dropped if src[k])
        out.append(LabeledSentence(t.sentence.tokens, t.sentence.labels, sources,
                                   dropped=s.dropped + lost))
    result = Dataset(out)
    report.n_output = len(result)
    return result, report
