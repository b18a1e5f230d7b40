"""Error models: vanilla, estimated confusion matrix, context channel, external seq2seq.

All models share two entry points, :func:`perturb` for sentences and
:func:`perturb_token` for single words, and serialize to versioned JSON.
"""

from __future__ import annotations

import bisect
import json
import string
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _process
from ._util import as_rng, atomic_write
from .align import Op, edit_script, pair_error_counts
from .corpus import (
    PLACEHOLDER_DEL,
    PLACEHOLDER_INS,
    check_placeholder_free,
)

EPS = ""  # target of a deletion
OOV = "<unk>"  # bucket for characters outside the alphabet
EOS = "</s>"  # pseudo-character closing a string; only insertions happen there
BOS = "\x02"  # left padding of channel contexts

FORMAT = "noisycorpus.model"
FORMAT_VERSION = 1
NUM_BINS = 10


class ModelError(ValueError):
    pass


# -- alphabet -----------------------------------------------------------------

@dataclass(frozen=True)
class Alphabet:
    chars: tuple[str, ...]

    def __post_init__(self):
        chars = tuple(dict.fromkeys(self.chars))
        for c in chars:
            if len(c) != 1:
                raise ModelError(f"alphabet entries must be single characters: {c!r}")
            if c in (PLACEHOLDER_INS, PLACEHOLDER_DEL):
                raise ModelError("alphabet may not contain U+00AC or U+00A6")
        if len(chars) < 2:
            raise ModelError("alphabet needs at least two characters")
        object.__setattr__(self, "chars", chars)
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(chars)})

    def __len__(self):
        return len(self.chars)

    def __contains__(self, c):
        return c in self._index

    def __iter__(self):
        return iter(self.chars)

    @classmethod
    def from_texts(cls, texts, include_space: bool = False) -> "Alphabet":
        seen = set()
        for t in texts:
            seen.update(t)
        if not include_space:
            seen = {c for c in seen if not c.isspace()}
        seen -= {PLACEHOLDER_INS, PLACEHOLDER_DEL}
        return cls(tuple(sorted(seen)))


DEFAULT_ALPHABET = Alphabet(tuple(string.ascii_letters + string.digits + string.punctuation))


# -- seq2seq encoding ---------------------------------------------------------

def encode_for_seq2seq(sentence: str) -> str:
    """Character-level encoding: whitespace becomes U+00AC, characters are space-separated.

    >>> encode_for_seq2seq("No nzw")
    'N o ¬ n z w'
    """
    check_placeholder_free(sentence, "sentence")
    return " ".join(PLACEHOLDER_INS if ch.isspace() else ch for ch in sentence)


def decode_from_seq2seq(encoded: str) -> str:
    return "".join(encoded.split(" ")).replace(PLACEHOLDER_INS, " ")


# -- intensity ----------------------------------------------------------------

def rate_bin(rate: float) -> int:
    """Index of the 10-point bin holding `rate` (a fraction); 1.0 goes in the last bin."""
    return min(int(rate * NUM_BINS + 1e-9), NUM_BINS - 1) if rate > 0 else 0


@dataclass(frozen=True)
class IntensityDistribution:
    """Distribution of per-sentence token error rates.

    kind is one of ``constant`` (params: rate), ``uniform`` (low, high),
    ``bins`` (10 weights, uniform inside each 10-point bin) or ``geometric``
    (ratio: bin weights decay as ratio**i; optional ``num_bins`` truncation).
    """
    kind: str = "constant"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.params
        if self.kind == "constant":
            if not 0 <= p.get("rate", 0.0) <= 1:
                raise ModelError("rate must be in [0, 1]")
        elif self.kind == "uniform":
            if not 0 <= p["low"] <= p["high"] <= 1:
                raise ModelError("need 0 <= low <= high <= 1")
        elif self.kind == "bins":
            w = p["weights"]
            if len(w) != NUM_BINS or min(w) < 0 or sum(w) <= 0:
                raise ModelError(f"bins needs {NUM_BINS} non-negative weights")
        elif self.kind == "geometric":
            if not 0 <= p["ratio"] <= 1:
                raise ModelError("ratio must be in [0, 1]")
        else:
            raise ModelError(f"unknown intensity kind: {self.kind!r}")

    @classmethod
    def constant(cls, rate: float):
        return cls("constant", {"rate": float(rate)})

    @classmethod
    def from_bins(cls, weights):
        total = float(sum(weights))
        return cls("bins", {"weights": [w / total for w in weights]})

    @classmethod
    def geometric(cls, ratio: float, num_bins: int = NUM_BINS):
        return cls("geometric", {"ratio": float(ratio), "num_bins": int(num_bins)})

    def bin_weights(self) -> Optional[list]:
        if self.kind == "bins":
            total = sum(self.params["weights"])
            return [w / total for w in self.params["weights"]]
        if self.kind == "geometric":
            r = self.params["ratio"]
            k = self.params.get("num_bins", NUM_BINS)
            w = [r ** i if i < k else 0.0 for i in range(NUM_BINS)]
            total = sum(w)
            return [x / total for x in w]
        return None

    def sample(self, rng) -> float:
        if self.kind == "constant":
            return self.params.get("rate", 0.0)
        if self.kind == "uniform":
            return rng.uniform(self.params["low"], self.params["high"])
        w = self.bin_weights()
        b = bisect.bisect_right(_cumulative(w), rng.random() * sum(w))
        b = min(b, NUM_BINS - 1)
        return (b + rng.random()) / NUM_BINS

    def mean(self) -> float:
        if self.kind == "constant":
            return self.params.get("rate", 0.0)
        if self.kind == "uniform":
            return (self.params["low"] + self.params["high"]) / 2
        return sum(w * (b + 0.5) / NUM_BINS for b, w in enumerate(self.bin_weights()))

    def is_zero(self) -> bool:
        if self.kind == "constant":
            return self.params.get("rate", 0.0) == 0
        if self.kind == "uniform":
            return self.params["high"] == 0
        return False

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "IntensityDistribution":
        d = dict(d)
        return cls(d.pop("kind"), d)


def _cumulative(weights):
    out = []
    acc = 0.0
    for w in weights:
        acc += w
        out.append(acc)
    return out


class _Row:
    """A categorical distribution prepared for repeated sampling."""
    __slots__ = ("outcomes", "cum", "total")

    def __init__(self, dist: dict):
        items = sorted((k, v) for k, v in dist.items() if v > 0)
        self.outcomes = [k for k, _ in items]
        self.cum = _cumulative(v for _, v in items)
        self.total = self.cum[-1] if self.cum else 0.0

    def draw(self, rng):
        i = bisect.bisect_right(self.cum, rng.random() * self.total)
        return self.outcomes[min(i, len(self.outcomes) - 1)]


# -- vanilla model ------------------------------------------------------------

@dataclass(frozen=True)
class VanillaModel:
    """Equal thirds of the edit probability `eta` go to insertion, deletion and substitution.

    Per source character exactly one of these happens: it is kept as is
    (1 - eta), deleted (eta/3), substituted by a uniformly chosen other
    character (eta/3), or kept with a uniformly chosen character inserted
    before it (eta/3). The end of the string is one more insertion gap
    with rate eta/3.
    """
    eta: float
    alphabet: Alphabet = DEFAULT_ALPHABET

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ModelError(f"eta must be in [0, 1], got {self.eta}")

    def insertion_distribution(self) -> dict:
        p = self.eta / 3 / len(self.alphabet)
        return {c: p for c in self.alphabet}

    def deletion_probability(self, c: str) -> float:
        return self.eta / 3

    def substitution_distribution(self, c: str) -> dict:
        others = [x for x in self.alphabet if x != c]
        p = self.eta / 3 / len(others)
        return {x: p for x in others}

    def keep_probability(self, c: str) -> float:
        """Probability that `c` survives (possibly with an insertion before it)."""
        return 1.0 - 2.0 * self.eta / 3

    def sample_ops(self, word: str, rng) -> list:
        eta = self.eta
        third = eta / 3
        chars = self.alphabet.chars
        n = len(chars)
        ops = []
        for c in word:
            u = rng.random()
            if u >= eta:
                ops.append((Op.MATCH, c, c))
            elif u < third:
                ops.append((Op.DELETE, c, None))
            elif u < 2 * third:
                if c in self.alphabet:
                    k = rng.randrange(n - 1)
                    x = chars[k]
                    if x == c:
                        x = chars[n - 1]
                else:
                    x = chars[rng.randrange(n)]
                ops.append((Op.SUBSTITUTE, c, x))
            else:
                ops.append((Op.INSERT, None, chars[rng.randrange(n)]))
                ops.append((Op.MATCH, c, c))
        if eta > 0 and rng.random() < third:
            ops.append((Op.INSERT, None, chars[rng.randrange(n)]))
        return ops


def vanilla_from_eta(eta: float, alphabet: Alphabet = DEFAULT_ALPHABET) -> VanillaModel:
    return VanillaModel(float(eta), alphabet)


def _ops_output(ops) -> str:
    return "".join(dst for _, _, dst in ops if dst is not None)


# -- confusion matrix model ---------------------------------------------------

@dataclass
class ConfusionModel:
    """Per-character substitution rows plus a context-free insertion model.

    ``subst[c]`` maps each outcome to its probability: ``c`` itself is keep,
    ``EPS`` is deletion, anything else a substitution. An insertion happens
    in each gap (before every character and at the end) with probability
    ``ins_rate``; the inserted character follows ``ins``.
    """
    subst: dict
    ins: dict
    ins_rate: float
    alphabet: Alphabet
    smoothing_k: float = 0.0

    def __post_init__(self):
        self._rows = {c: _Row(row) for c, row in self.subst.items()}
        self._ins_row = _Row(self.ins) if self.ins else None

    def row(self, c: str) -> dict:
        if c in self.subst:
            return self.subst[c]
        if c not in self.alphabet and OOV in self.subst:
            return self.subst[OOV]
        return {c: 1.0}

    def keep_probability(self, c: str) -> float:
        return self.row(c).get(c if c in self.subst or c in self.alphabet else OOV, 0.0)

    def deletion_probability(self, c: str) -> float:
        return self.row(c).get(EPS, 0.0)

    def substitution_distribution(self, c: str) -> dict:
        key = c if (c in self.subst or c in self.alphabet) else OOV
        return {t: p for t, p in self.row(c).items() if t not in (key, EPS)}

    def sample_ops(self, word: str, rng) -> list:
        ops = []
        ins_rate = self.ins_rate
        for c in word:
            if ins_rate > 0 and rng.random() < ins_rate:
                ops.append((Op.INSERT, None, self._ins_row.draw(rng)))
            row = self._rows.get(c)
            key = c
            if row is None and c not in self.alphabet:
                row = self._rows.get(OOV)
                key = OOV
            if row is None:
                ops.append((Op.MATCH, c, c))
                continue
            t = row.draw(rng)
            if t == key or t == OOV:
                ops.append((Op.MATCH, c, c))
            elif t == EPS:
                ops.append((Op.DELETE, c, None))
            else:
                ops.append((Op.SUBSTITUTE, c, t))
        if ins_rate > 0 and rng.random() < ins_rate:
            ops.append((Op.INSERT, None, self._ins_row.draw(rng)))
        return ops


def estimate_confusion(pairs, smoothing_k: float = 0.1,
                       alphabet: Optional[Alphabet] = None) -> ConfusionModel:
    """Count aligned character events in (clean_word, noisy_word) pairs.

    Without an alphabet, the characters seen on either side form one.
    Characters outside the alphabet are counted under ``OOV``.
    """
    pairs = list(pairs)
    if not pairs:
        raise ModelError("cannot estimate a confusion model from no pairs")
    if alphabet is None:
        alphabet = Alphabet.from_texts([c for c, _ in pairs] + [n for _, n in pairs])

    def key(ch):
        return ch if ch in alphabet else OOV

    counts: dict = defaultdict(Counter)
    ins_counts: Counter = Counter()
    gaps = 0
    for clean, noisy in pairs:
        gaps += len(clean) + 1
        for op in edit_script(clean, noisy).ops:
            if op.kind is Op.INSERT:
                ins_counts[key(op.dst_char)] += 1
            elif op.kind is Op.DELETE:
                counts[key(op.src_char)][EPS] += 1
            else:
                src = key(op.src_char)
                dst = key(op.dst_char)
                counts[src][src if op.kind is Op.MATCH else dst] += 1

    k = smoothing_k
    targets = list(alphabet) + [EPS]
    subst = {}
    for c in list(alphabet) + ([OOV] if OOV in counts else []):
        row_counts = counts.get(c)
        if not row_counts and k == 0:
            continue
        row_counts = row_counts or Counter()
        support = set(targets) | set(row_counts)
        if c == OOV:
            support.add(OOV)
        total = sum(row_counts.values()) + k * len(support)
        subst[c] = {t: (row_counts.get(t, 0) + k) / total for t in sorted(support)}
    n_ins = sum(ins_counts.values())
    ins = {}
    if n_ins or k:
        support = set(alphabet) | set(ins_counts)
        total = n_ins + k * len(support)
        ins = {t: (ins_counts.get(t, 0) + k) / total for t in sorted(support)}
        ins.pop(OOV, None)
        norm = sum(ins.values())
        ins = {t: p / norm for t, p in ins.items()} if norm else {}
    ins_rate = min(1.0, n_ins / gaps) if gaps else 0.0
    return ConfusionModel(subst, ins, ins_rate, alphabet, smoothing_k)


# -- context channel model ----------------------------------------------------

KEEP = "k"
DELETE = "d"


def _sub(x):
    return "s" + x


def _ins(x):
    return "i" + x


class _ChannelRow:
    __slots__ = ("keep", "nonkeep", "nonkeep_noins")

    def __init__(self, dist: dict):
        self.keep = dist.get(KEEP, 0.0)
        rest = {e: p for e, p in dist.items() if e != KEEP and p > 0}
        self.nonkeep = _Row(rest) if rest else None
        noins = {e: p for e, p in rest.items() if e[0] != "i"}
        self.nonkeep_noins = _Row(noins) if noins else None


@dataclass
class ChannelModel:
    """Context-conditioned character channel with a per-sentence intensity mixture.

    For each clean character, given up to ``order`` preceding clean
    characters, one event is drawn: keep, delete, substitute by x, or insert
    x before it. After an insertion the event for the same character is
    drawn again, at most two insertions per gap. Event tables of different
    context lengths are interpolated with Witten-Bell weights.

    Before sampling a sentence, a target token error rate is drawn from
    ``intensity`` and every row's keep probability is rescaled as
    ``1 - m * (1 - keep)`` (clamped), with ``m`` solved so that the expected
    token error rate of that sentence hits the target.
    """
    order: int
    counts: dict  # (context, char) -> Counter of events; context length = order used
    intensity: IntensityDistribution
    alphabet: Alphabet
    smoothing_k: float = 0.1

    def __post_init__(self):
        if not 0 <= self.order <= 4:
            raise ModelError("order must be between 0 and 4")
        self._cache: dict = {}
        self._base_cache: dict = {}
        glob = Counter()
        for (ctx, c), events in self.counts.items():
            if ctx == "" and c != EOS:
                for e, n in events.items():
                    glob[e] += n
        self._global = glob

    # rows

    def _support(self, c: str) -> list:
        chars = self.alphabet.chars
        events = [KEEP] + [_ins(x) for x in chars]
        if c != EOS:
            events += [DELETE] + [_sub(x) for x in chars if x != c]
        return events

    def distribution(self, context: str, c: str) -> dict:
        """P(event | context, c); `context` is padded/truncated to ``order`` chars."""
        context = (BOS * self.order + context)[-self.order:] if self.order else ""
        dist = self._base_cache.get(c)
        if dist is None:
            dist = self._base_cache[c] = self._base_distribution(c)
        for r in range(1, self.order + 1):
            events = self.counts.get((context[-r:], c))
            if not events:
                continue
            n = sum(events.values())
            lam = n / (n + len(events))
            dist = {e: (1 - lam) * p for e, p in dist.items()}
            for e, cnt in events.items():
                dist[e] = dist.get(e, 0.0) + lam * cnt / n
        return {e: p for e, p in dist.items() if p > 0}

    def _base_distribution(self, c: str) -> dict:
        """Add-k smoothed context-free row; unseen characters borrow the global counts."""
        k = self.smoothing_k
        base = self.counts.get(("", c))
        if not base:
            if c == EOS:
                base = Counter({KEEP: 1})
            else:
                base = Counter({e: n for e, n in self._global.items() if e != _sub(c)})
        support = set(self._support(c)) | set(base)
        total = sum(base.values()) + k * len(support)
        if total == 0:
            dist = {KEEP: 1.0}
        else:
            dist = {e: (base.get(e, 0) + k) / total for e in support}
        return dist

    def _row(self, context: str, c: str) -> _ChannelRow:
        key = (context, c)
        row = self._cache.get(key)
        if row is None:
            row = self._cache[key] = _ChannelRow(self.distribution(context, c))
        return row

    def _rows_for(self, text: str) -> list:
        n = self.order
        padded = BOS * n + text
        rows = [self._row(padded[i:i + n] if n else "", ch) for i, ch in enumerate(text)]
        rows.append(self._row(padded[len(text):len(text) + n] if n else "", EOS))
        return rows

    # intensity

    @staticmethod
    def _expected_ter(q: np.ndarray, m: float) -> float:
        """Mean over tokens of P(token altered); `q` is tokens x chars of non-keep mass."""
        ok = np.clip(1.0 - m * q, 0.0, 1.0).prod(axis=1)
        return float(1.0 - ok.mean())

    def solve_multiplier(self, text: str, target: float, rows=None) -> float:
        """Keep-rescaling factor making the sentence's expected token error rate `target`.

        A token counts as altered if any of its characters, or the gap
        after it, draws a non-keep event.
        """
        rows = rows if rows is not None else self._rows_for(text)
        groups = []
        current = []
        for ch, row in zip(text, rows):
            if ch.isspace():
                if current:
                    current.append(1.0 - row.keep)
                    groups.append(current)
                    current = []
                continue
            current.append(1.0 - row.keep)
        if current:
            current.append(1.0 - rows[-1].keep)
            groups.append(current)
        if not groups:
            return 1.0
        q = np.zeros((len(groups), max(map(len, groups))))
        for i, g in enumerate(groups):
            q[i, :len(g)] = g
        positive = q[q > 0]
        if not positive.size:
            return 1.0
        hi = 1.0 / positive.min()
        if target >= self._expected_ter(q, hi):
            return hi
        lo = 0.0
        for _ in range(40):
            mid = (lo + hi) / 2
            if self._expected_ter(q, mid) < target:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2

    # sampling

    def sample_ops(self, text: str, rng, multiplier: Optional[float] = None) -> list:
        rows = self._rows_for(text)
        if multiplier is None:
            target = self.intensity.sample(rng)
            multiplier = self.solve_multiplier(text, target, rows)
        m = multiplier
        ops = []
        chars = list(text) + [None]
        for ch, row in zip(chars, rows):
            keep = min(1.0, max(0.0, 1.0 - m * (1.0 - row.keep)))
            n_ins = 0
            while True:
                if rng.random() < keep:
                    if ch is not None:
                        ops.append((Op.MATCH, ch, ch))
                    break
                dist = row.nonkeep if n_ins < 2 else row.nonkeep_noins
                if dist is None:
                    if ch is not None:
                        ops.append((Op.MATCH, ch, ch))
                    break
                e = dist.draw(rng)
                if e[0] == "i":
                    ops.append((Op.INSERT, None, e[1:]))
                    n_ins += 1
                    continue
                if e == DELETE:
                    ops.append((Op.DELETE, ch, None))
                else:
                    ops.append((Op.SUBSTITUTE, ch, e[1:]))
                break
        return ops


def _channel_events(clean: str, noisy: str):
    """(position in clean, event) for each event; position len(clean) is the end."""
    pos = 0
    for op in edit_script(clean, noisy).ops:
        if op.kind is Op.INSERT:
            yield pos, _ins(op.dst_char)
            continue
        if op.kind is Op.MATCH:
            yield pos, KEEP
        elif op.kind is Op.DELETE:
            yield pos, DELETE
        else:
            yield pos, _sub(op.dst_char)
        pos += 1
    yield len(clean), KEEP


def train_channel(p, order: int = 3, smoothing_k: float = 0.1,
                  alphabet: Optional[Alphabet] = None) -> ChannelModel:
    """Fit event tables for context lengths 0..order and the intensity histogram."""
    pairs = list(getattr(p, "pairs", p))
    if not pairs:
        raise ModelError("cannot train a channel model on an empty corpus")
    if not 0 <= order <= 4:
        raise ModelError("order must be between 0 and 4")
    if alphabet is None:
        alphabet = Alphabet.from_texts([c for c, _ in pairs] + [n for _, n in pairs],
                                       include_space=True)
    counts: dict = defaultdict(Counter)
    bins = [0] * NUM_BINS
    for clean, noisy in pairs:
        check_placeholder_free(clean)
        check_placeholder_free(noisy)
        padded = BOS * order + clean
        for pos, event in _channel_events(clean, noisy):
            c = clean[pos] if pos < len(clean) else EOS
            if event[0] in "si" and event[1:] not in alphabet:
                continue
            for r in range(order + 1):
                ctx = padded[pos + order - r:pos + order] if r else ""
                counts[(ctx, c)][event] += 1
        errors, total = pair_error_counts(clean, noisy)
        bins[rate_bin(errors / total if total else 0.0)] += 1
    intensity = IntensityDistribution.from_bins(bins)
    return ChannelModel(order, dict(counts), intensity, alphabet, smoothing_k)


# -- external generator -------------------------------------------------------

@dataclass(frozen=True)
class ExternalGenerator:
    """A trained seq2seq reachable as a command speaking the line protocol."""
    command: tuple
    mode: str = "sentence"  # or "token"
    timeout: float = 600.0

    def __post_init__(self):
        object.__setattr__(self, "command", tuple(_process.split_command(self.command)))
        if self.mode not in ("sentence", "token"):
            raise ModelError(f"mode must be 'sentence' or 'token', got {self.mode!r}")


def external_generate(gen: ExternalGenerator, inputs: Sequence[str]) -> list[str]:
    """Send encoded inputs through the child process and decode its answers.

    In token mode every whitespace-separated word is its own line and the
    answers are re-joined with single spaces.
    """
    if gen.mode == "sentence":
        lines = [encode_for_seq2seq(s) for s in inputs]
        return [decode_from_seq2seq(x) for x in _process.run_lines(gen.command, lines, gen.timeout)]
    words = [s.split() for s in inputs]
    flat = [encode_for_seq2seq(w) for ws in words for w in ws]
    out = iter(decode_from_seq2seq(x) for x in _process.run_lines(gen.command, flat, gen.timeout))
    return [" ".join(w for w in (next(out) for _ in ws) if w) for ws in words]


# -- common entry points ------------------------------------------------------

def _per_token(model, sentence: str, rng) -> str:
    words = []
    for w in sentence.split():
        w2 = _ops_output(model.sample_ops(w, rng))
        words.extend(w2.split())
    return " ".join(words)


def perturb(model, sentence: str, seed) -> str:
    """Noisy version of `sentence`, fully determined by (model, sentence, seed).

    Vanilla and confusion models work token by token and keep the
    whitespace structure; a channel model sees the whole string, spaces
    included.
    """
    check_placeholder_free(sentence, "sentence")
    if isinstance(model, ExternalGenerator):
        return external_generate(model, [sentence])[0]
    rng = as_rng(seed)
    if isinstance(model, ChannelModel):
        return _ops_output(model.sample_ops(sentence, rng))
    return _per_token(model, sentence, rng)


def perturb_token(model, word: str, seed) -> str:
    check_placeholder_free(word, "word")
    if not word:
        return word
    if isinstance(model, ExternalGenerator):
        gen = ExternalGenerator(model.command, "sentence", model.timeout)
        return external_generate(gen, [word])[0]
    return _ops_output(model.sample_ops(word, as_rng(seed)))


def sample_edits(model, text: str, seed) -> list:
    """The event sequence a model draws for `text`, as (Op, src, dst) triples."""
    return model.sample_ops(text, as_rng(seed))


# -- serialization ------------------------------------------------------------

def model_to_dict(model) -> dict:
    head = {"format": FORMAT, "version": FORMAT_VERSION}
    if isinstance(model, VanillaModel):
        return {**head, "type": "vanilla", "eta": model.eta,
                "alphabet": "".join(model.alphabet.chars)}
    if isinstance(model, ConfusionModel):
        return {**head, "type": "confusion", "alphabet": "".join(model.alphabet.chars),
                "smoothing_k": model.smoothing_k, "ins_rate": model.ins_rate,
                "ins": model.ins, "subst": model.subst}
    if isinstance(model, ChannelModel):
        rows = [{"context": ctx, "char": c, "events": dict(sorted(ev.items()))}
                for (ctx, c), ev in sorted(model.counts.items())]
        return {**head, "type": "channel", "alphabet": "".join(model.alphabet.chars),
                "order": model.order, "smoothing_k": model.smoothing_k,
                "intensity": model.intensity.to_dict(), "rows": rows}
    if isinstance(model, ExternalGenerator):
        return {**head, "type": "external", "command": list(model.command),
                "mode": model.mode, "timeout": model.timeout}
    raise TypeError(f"not a model: {type(model).__name__}")


def model_from_dict(d: dict):
    if d.get("format") != FORMAT:
        raise ModelError("not a noisycorpus model document")
    if d.get("version") != FORMAT_VERSION:
        raise ModelError(f"unsupported model version {d.get('version')}")
    kind = d.get("type")
    if kind == "vanilla":
        return VanillaModel(d["eta"], Alphabet(tuple(d["alphabet"])))
    if kind == "confusion":
        return ConfusionModel(d["subst"], d["ins"], d["ins_rate"],
                              Alphabet(tuple(d["alphabet"])), d["smoothing_k"])
    if kind == "channel":
        counts = {(r["context"], r["char"]): Counter(r["events"]) for r in d["rows"]}
        return ChannelModel(d["order"], counts, IntensityDistribution.from_dict(d["intensity"]),
                            Alphabet(tuple(d["alphabet"])), d["smoothing_k"])
    if kind == "external":
        return ExternalGenerator(tuple(d["command"]), d["mode"], d["timeout"])
    raise ModelError(f"unknown model type {kind!r}")


def dumps_model(model) -> str:
    return json.dumps(model_to_dict(model), ensure_ascii=False, sort_keys=True, indent=1) + "\n"


def loads_model(text: str):
    return model_from_dict(json.loads(text))


def save_model(model, path: str) -> None:
    atomic_write(path, dumps_model(model))


def load_model(path: str):
    with open(path, encoding="utf-8") as f:
        return loads_model(f.read())
