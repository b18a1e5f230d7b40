"""Character edit scripts, word-level sentence alignment and label transfer.

The character alignment is a plain unit-cost Levenshtein DP. The script is
read off from the start of both strings and, among equally cheap moves,
prefers match, then substitution, then deletion, then insertion.

Word alignment groups noisy words with the clean words whose characters they
were aligned to. Clean words define the pair boundaries; if deleted or
inserted whitespace joins several words into one unit, the whole group
becomes a single pair.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .corpus import (
    PLACEHOLDER_DEL,
    PLACEHOLDER_INS,
    LabeledSentence,
    check_placeholder_free,
    continuation_label,
    normalize_bio,
    split_label,
)

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


class Op(str, enum.Enum):
    MATCH = "-"
    SUBSTITUTE = "s"
    INSERT = "i"
    DELETE = "d"


class EditOp(NamedTuple):
    kind: Op
    src_char: Optional[str] = None
    dst_char: Optional[str] = None

    def __repr__(self):
        return f"{self.kind.name.title()}({self.src_char!r}->{self.dst_char!r})"


@dataclass(frozen=True)
class EditScript:
    ops: tuple[EditOp, ...]
    cost: int

    def apply(self, src: str) -> str:
        """Replay the script on `src`; raises ValueError if it does not fit."""
        out = []
        i = 0
        for op in self.ops:
            if op.kind is Op.INSERT:
                out.append(op.dst_char)
                continue
            if i >= len(src) or src[i] != op.src_char:
                raise ValueError(f"script does not apply to {src!r} at {i}")
            if op.kind is not Op.DELETE:
                out.append(op.dst_char)
            i += 1
        if i != len(src):
            raise ValueError("script does not consume the whole source")
        return "".join(out)

    def counts(self) -> dict:
        c = {op.name.lower(): 0 for op in Op}
        for op in self.ops:
            c[op.kind.name.lower()] += 1
        return c

    def render(self) -> tuple[str, str, str]:
        """Aligned source, aligned target and the operation string.

        Insertions show as U+00AC on the source side and deletions as U+00A6
        on the target side; matches are "-".
        """
        src, dst = [], []
        for op in self.ops:
            src.append(op.src_char if op.src_char is not None else PLACEHOLDER_INS)
            dst.append(op.dst_char if op.dst_char is not None else PLACEHOLDER_DEL)
        return "".join(src), "".join(dst), "".join(op.kind.value for op in self.ops)


def _fill(a, b):
    n, m = a.shape[0], b.shape[0]
    d = np.empty((n + 1, m + 1), dtype=np.int32)
    for j in range(m + 1):
        d[0, j] = j
    for i in range(1, n + 1):
        d[i, 0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = d[i - 1, j - 1] + (0 if ai == b[j - 1] else 1)
            x = d[i - 1, j] + 1
            if x < best:
                best = x
            x = d[i, j - 1] + 1
            if x < best:
                best = x
            d[i, j] = best
    return d


def _fill_py(a: str, b: str) -> list:
    prev = list(range(len(b) + 1))
    rows = [prev]
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j - 1] + (ca != cb), prev[j] + 1, cur[j - 1] + 1))
        rows.append(cur)
        prev = cur
    return rows


if numba is not None:
    _fill_jit = numba.njit(cache=True, nogil=True)(_fill)
else:  # pragma: no cover
    _fill_jit = None

# Below this many DP cells the pure-Python fill is faster than a numba call.
_JIT_THRESHOLD = 400


def _codes(s: str):
    return np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32)


def distance_table(src: str, dst: str):
    """Full (len(src)+1) x (len(dst)+1) Levenshtein table, indexable as t[i][j]."""
    if _fill_jit is not None and len(src) * len(dst) >= _JIT_THRESHOLD:
        return _fill_jit(_codes(src), _codes(dst))
    return _fill_py(src, dst)


def edit_script(src: str, dst: str) -> EditScript:
    """Minimal-cost edit script turning `src` into `dst`.

    >>> edit_script("York", "Vork").ops[0]
    Substitute('Y'->'V')
    """
    n, m = len(src), len(dst)
    # suffix distances: dist(src[i:], dst[j:]) == t[n - i][m - j]
    t = distance_table(src[::-1], dst[::-1])
    i = j = 0
    ops = []
    while i < n or j < m:
        here = t[n - i][m - j]
        if i < n and j < m:
            diag = t[n - i - 1][m - j - 1]
            if src[i] == dst[j] and diag == here:
                ops.append(EditOp(Op.MATCH, src[i], dst[j]))
                i += 1
                j += 1
                continue
            if diag + 1 == here:
                ops.append(EditOp(Op.SUBSTITUTE, src[i], dst[j]))
                i += 1
                j += 1
                continue
        if i < n and t[n - i - 1][m - j] + 1 == here:
            ops.append(EditOp(Op.DELETE, src[i], None))
            i += 1
            continue
        ops.append(EditOp(Op.INSERT, None, dst[j]))
        j += 1
    return EditScript(tuple(ops), int(t[n][m]))


def levenshtein(src: str, dst: str) -> int:
    return int(distance_table(src, dst)[len(src)][len(dst)])


# -- word alignment -----------------------------------------------------------

@dataclass(frozen=True)
class WordAlignment:
    pairs: tuple[tuple[str, str], ...]
    script: Optional[EditScript] = None

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


@dataclass(frozen=True)
class _Group:
    clean: tuple[int, ...]  # clean word indices, possibly empty
    noisy: tuple[int, ...]  # noisy word indices, possibly empty


def _align_groups(clean: str, noisy: str):
    """Clean words, noisy words, the groups pairing them, and the edit script."""
    check_placeholder_free(clean, "clean sentence")
    check_placeholder_free(noisy, "noisy sentence")
    script = edit_script(clean, noisy)

    # owner word index for every clean character (-1 for whitespace)
    owner = []
    clean_words = []
    w = -1
    prev_space = True
    for ch in clean:
        if ch.isspace():
            owner.append(-1)
            prev_space = True
        else:
            if prev_space:
                w += 1
                clean_words.append([])
            clean_words[w].append(ch)
            owner.append(w)
            prev_space = False
    clean_words = ["".join(cw) for cw in clean_words]

    # walk the noisy side, collecting words and the clean words they draw from
    noisy_words: list = []
    noisy_owners: list = []
    current: list = []
    current_owners: set = set()
    i = 0
    for op in script.ops:
        src_owner = -1
        if op.kind is not Op.INSERT:
            src_owner = owner[i]
            i += 1
        if op.kind is Op.DELETE:
            continue
        ch = op.dst_char
        if ch.isspace():
            if current:
                noisy_words.append("".join(current))
                noisy_owners.append(current_owners)
                current, current_owners = [], set()
            continue
        current.append(ch)
        if src_owner >= 0:
            current_owners.add(src_owner)
    if current:
        noisy_words.append("".join(current))
        noisy_owners.append(current_owners)

    # connected components of the clean/noisy "shares characters" relation;
    # alignment is monotone, so each component is a pair of contiguous runs
    owned = set().union(*noisy_owners)
    groups = []
    ci = nj = 0
    nc, nn = len(clean_words), len(noisy_words)
    while ci < nc or nj < nn:
        if ci < nc and ci not in owned:
            groups.append(_Group((ci,), ()))
            ci += 1
        elif nj < nn and not noisy_owners[nj]:
            groups.append(_Group((), (nj,)))
            nj += 1
        else:
            members = [nj]
            hi = max(noisy_owners[nj])
            k = nj + 1
            while k < nn and noisy_owners[k] and min(noisy_owners[k]) <= hi:
                members.append(k)
                hi = max(hi, max(noisy_owners[k]))
                k += 1
            groups.append(_Group(tuple(range(ci, hi + 1)), tuple(members)))
            ci = hi + 1
            nj = k
    return clean_words, noisy_words, noisy_owners, groups, script


def align_words(clean: str, noisy: str) -> WordAlignment:
    """Pair clean words with the noisy text their characters were aligned to.

    >>> align_words("New York", "New Vork").pairs
    (('New', 'New'), ('York', 'Vork'))
    >>> align_words("ab cd", "abcd").pairs
    (('ab cd', 'abcd'),)
    """
    cw, nw, _, groups, script = _align_groups(clean, noisy)
    pairs = tuple((" ".join(cw[i] for i in g.clean), " ".join(nw[j] for j in g.noisy))
                  for g in groups)
    return WordAlignment(pairs, script)


@dataclass(frozen=True)
class Transfer:
    sentence: LabeledSentence
    # for each output token, index of the clean token it came from (None if inserted)
    origin: tuple[Optional[int], ...]
    dropped: tuple[int, ...]


def _pick_label(labels: Sequence[str]) -> str:
    for label in labels:
        if label != "O":
            return label
    return labels[0]


def transfer(clean: LabeledSentence, noisy_text: str, bio: Optional[bool] = None) -> Transfer:
    """Label transfer with bookkeeping: which clean token each noisy token came from."""
    cw, nw, owners, groups, _ = _align_groups(" ".join(clean.tokens), noisy_text)
    assert len(cw) == len(clean.tokens)
    if bio is None:
        try:
            for label in clean.labels:
                split_label(label)
            bio = True
        except ValueError:
            bio = False
    tokens, labels, sources, origin = [], [], [], []
    dropped = []
    for g in groups:
        if not g.noisy:
            dropped.extend(g.clean)
            continue
        if not g.clean:
            for j in g.noisy:
                tokens.append(nw[j])
                labels.append("O")
                sources.append("")
                origin.append(None)
            continue
        used = set()
        for j in g.noisy:
            own = sorted(owners[j])
            first = own[0]
            tokens.append(nw[j])
            origin.append(first)
            if first in used:
                labels.append(continuation_label(labels[-1]))
                sources.append("")
            else:
                labels.append(_pick_label([clean.labels[k] for k in own]))
                sources.append(clean.tokens[first])
            used.update(own)
        # clean words swallowed by a merge without being anyone's first owner
        firsts = {sorted(owners[j])[0] for j in g.noisy}
        dropped.extend(k for k in g.clean if k not in firsts)
    if bio:
        labels = normalize_bio(labels)
    sentence = LabeledSentence(tokens, labels, sources, dropped=len(dropped))
    return Transfer(sentence, tuple(origin), tuple(sorted(dropped)))


def transfer_labels(clean: LabeledSentence, noisy_text: str) -> LabeledSentence:
    """Noisy tokens of `noisy_text` labeled from their aligned clean tokens.

    Inserted words get O, split-off pieces continue the label of the word
    they split from, and clean words with no noisy image are dropped (their
    number is kept in ``dropped``). ``source_tokens`` holds the clean
    counterpart of each noisy token, "" for insertions.
    """
    return transfer(clean, noisy_text).sentence


def pair_error_counts(clean: str, noisy: str) -> tuple[int, int]:
    """(erroneous tokens, total) for one sentence pair.

    A noisy token is erroneous if it differs from its clean counterpart;
    dropped clean tokens add one error and one to the total each.
    """
    tokens = clean.split()
    if not tokens:
        n = len(noisy.split())
        return n, n
    t = transfer(LabeledSentence(tokens, ["O"] * len(tokens)), noisy, bio=False)
    s = t.sentence
    errors = sum(a != b for a, b in zip(s.tokens, s.source_tokens)) + s.dropped
    return errors, len(s) + s.dropped


@dataclass
class WordPairReport:
    pairs: list
    skipped: list  # (pair index, reason)
    counts: dict

    def to_json(self) -> dict:
        return {"word_pairs": len(self.pairs),
                "skipped": [{"index": i, "reason": r} for i, r in self.skipped],
                **self.counts}


def extract_word_pairs(p, keep_empty: bool = False) -> WordPairReport:
    """Word-level pairs from every sentence pair.

    `p` is a ParallelCorpus or any iterable of (clean, noisy) strings.
    Pairs with an empty side are dropped unless `keep_empty`. A failing
    sentence pair is skipped and reported, not raised.
    """
    pairs = []
    skipped = []
    counts = {"match": 0, "substitute": 0, "insert": 0, "delete": 0,
              "dropped_words": 0, "inserted_words": 0}
    for idx, (clean, noisy) in enumerate(getattr(p, "pairs", p)):
        try:
            wa = align_words(clean, noisy)
        except (ValueError, TypeError) as e:
            skipped.append((idx, str(e)))
            continue
        for k, v in wa.script.counts().items():
            counts[k] += v
        for c, n in wa.pairs:
            if not n:
                counts["dropped_words"] += 1
            if not c:
                counts["inserted_words"] += 1
            if keep_empty or (c and n):
                pairs.append((c, n))
    return WordPairReport(pairs, skipped, counts)
