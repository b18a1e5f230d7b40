"""Reading and writing labeled datasets (CoNLL) and parallel corpora (TSV)."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

# Reserved for insertion / deletion marks in alignments and the seq2seq encoding.
PLACEHOLDER_INS = "¬"
PLACEHOLDER_DEL = "¦"
PLACEHOLDERS = (PLACEHOLDER_INS, PLACEHOLDER_DEL)

DOCSTART = "-DOCSTART-"
# Clean-side column value for noisy tokens that have no clean counterpart.
EMPTY_SOURCE = "<eps>"

_WS = re.compile(r"\s")
_COLUMN_SPLIT = re.compile(r"[ \t]+")


class CorpusError(ValueError):
    pass


class ParseError(CorpusError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(CorpusError):
    pass


def has_placeholder(text: str) -> bool:
    return PLACEHOLDER_INS in text or PLACEHOLDER_DEL in text


def check_placeholder_free(text: str, what: str = "text") -> None:
    if has_placeholder(text):
        raise ValidationError(
            f"{what} contains a reserved placeholder (U+00AC or U+00A6): {text!r}")


def check_token(surface: str) -> None:
    """Raise ValidationError unless `surface` is a valid token."""
    if not surface:
        raise ValidationError("empty token")
    if _WS.search(surface):
        raise ValidationError(f"token contains whitespace: {surface!r}")
    check_placeholder_free(surface, "token")


# -- BIO labels ---------------------------------------------------------------

def split_label(label: str) -> tuple[str, Optional[str]]:
    """('B', 'LOC') for 'B-LOC', ('O', None) for 'O'."""
    if label == "O":
        return "O", None
    if len(label) > 2 and label[1] == "-" and label[0] in "BI":
        return label[0], label[2:]
    raise ValidationError(f"not a BIO label: {label!r}")


def normalize_bio(labels: Sequence[str]) -> list[str]:
    """Rewrite IOB1-style span openers (I-X not continuing an X span) to B-X.

    Idempotent on valid BIO input. Raises ValidationError for labels that are
    neither O, B-X nor I-X.
    """
    out = []
    prev_type = None
    for label in labels:
        prefix, typ = split_label(label)
        if prefix == "I" and typ != prev_type:
            label = "B-" + typ
        out.append(label)
        prev_type = typ
    return out


def continuation_label(label: str) -> str:
    """Label for an extra token split off a token carrying `label`."""
    if label[:2] in ("B-", "I-"):
        return "I-" + label[2:]
    return label


# -- data types ---------------------------------------------------------------

@dataclass(frozen=True)
class LabeledSentence:
    tokens: tuple[str, ...]
    labels: tuple[str, ...]
    # Clean counterparts, "" where a noisy token has none. Empty tuple if unknown.
    source_tokens: tuple[str, ...] = ()
    # Clean tokens lost entirely during noising. Not serialized.
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "source_tokens", tuple(self.source_tokens))
        if len(self.tokens) != len(self.labels):
            raise ValidationError(
                f"{len(self.tokens)} tokens but {len(self.labels)} labels")
        if self.source_tokens and len(self.source_tokens) != len(self.tokens):
            raise ValidationError(
                f"{len(self.tokens)} tokens but {len(self.source_tokens)} source tokens")
        for tok in self.tokens:
            check_token(tok)
        for tok in self.source_tokens:
            if tok:
                check_token(tok)

    def __len__(self):
        return len(self.tokens)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    @property
    def source_text(self) -> str:
        return " ".join(t for t in self.source_tokens if t)

    @property
    def is_docstart(self) -> bool:
        return len(self.tokens) > 0 and self.tokens[0] == DOCSTART

    def with_tokens(self, tokens, source_tokens=None) -> "LabeledSentence":
        return LabeledSentence(
            tokens, self.labels,
            self.source_tokens if source_tokens is None else source_tokens,
            dropped=self.dropped)


@dataclass(frozen=True)
class Dataset:
    sentences: tuple[LabeledSentence, ...] = ()
    label_inventory: frozenset = field(default=frozenset(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        inventory = set()
        for s in self.sentences:
            for label in s.labels:
                if label[:2] in ("B-", "I-"):
                    inventory.add(label[2:])
                elif label != "O":
                    inventory.add(label)
        if self.label_inventory and not inventory <= set(self.label_inventory):
            missing = sorted(inventory - set(self.label_inventory))
            raise ValidationError(f"labels outside inventory: {missing}")
        if not self.label_inventory:
            object.__setattr__(self, "label_inventory", frozenset(inventory))

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def has_source(self) -> bool:
        return bool(self.sentences) and all(s.source_tokens for s in self.sentences)

    def num_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)


@dataclass(frozen=True)
class ColumnMap:
    """Which whitespace-separated column holds what. Negative indices count from the end."""
    token: int = 0
    label: int = -1
    source: Optional[int] = None
    # False keeps labels verbatim (e.g. POS tags) instead of validating BIO.
    bio: bool = True

    @classmethod
    def parse(cls, spec: str, bio: bool = True) -> "ColumnMap":
        """From a string like ``"token=0,source=1,label=2"``."""
        kwargs = {}
        for part in spec.split(","):
            part = part.strip()
            if not part:
                continue
            key, _, value = part.partition("=")
            key = key.strip()
            if key not in ("token", "label", "source"):
                raise ValueError(f"unknown column name: {key!r}")
            kwargs[key] = int(value)
        return cls(bio=bio, **kwargs)


# Layout of the noisy benchmark files: noisy token, clean token, label.
NOISY_COLUMNS = ColumnMap(token=0, source=1, label=2)


@dataclass(frozen=True)
class ParallelCorpus:
    pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        pairs = tuple((str(c), str(n)) for c, n in self.pairs)
        for clean, noisy in pairs:
            check_placeholder_free(clean, "clean sentence")
            check_placeholder_free(noisy, "noisy sentence")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


# -- CoNLL --------------------------------------------------------------------

def _make_sentence(rows, start_line, cmap: ColumnMap) -> LabeledSentence:
    tokens, labels, sources = [], [], []
    for lineno, cols in rows:
        try:
            tokens.append(cols[cmap.token])
            labels.append(cols[cmap.label])
            if cmap.source is not None:
                src = cols[cmap.source]
                sources.append("" if src == EMPTY_SOURCE else src)
        except IndexError:
            raise ParseError("column map refers to a missing column", lineno) from None
    try:
        if cmap.bio:
            labels = normalize_bio(labels)
        return LabeledSentence(tokens, labels, sources)
    except ValidationError as e:
        raise ValidationError(f"sentence starting at line {start_line}: {e}") from None


def parse_conll(text: str, column_map: ColumnMap = ColumnMap()) -> Dataset:
    """Parse blank-line separated CoNLL text.

    Columns are split on any run of spaces/tabs. Every non-blank line in the
    file must have the same number of columns.
    """
    sentences = []
    rows: list = []
    start = 0
    ncols = None
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            if rows:
                sentences.append(_make_sentence(rows, start, column_map))
                rows = []
            continue
        cols = _COLUMN_SPLIT.split(line.strip())
        if ncols is None:
            ncols = len(cols)
        elif len(cols) != ncols:
            raise ParseError(f"expected {ncols} columns, found {len(cols)}", lineno)
        if not rows:
            start = lineno
        rows.append((lineno, cols))
    if rows:
        sentences.append(_make_sentence(rows, start, column_map))
    return Dataset(sentences)


def write_conll(d: Dataset, column_map: Optional[ColumnMap] = None) -> str:
    """Serialize with single-tab column separators and one blank line between sentences.

    Without an explicit map, writes (token, source, label) if the dataset has
    source tokens and (token, label) otherwise.
    """
    if column_map is None:
        column_map = NOISY_COLUMNS if d.has_source else ColumnMap(token=0, label=1)
    fields = {"token": column_map.token, "label": column_map.label}
    if column_map.source is not None:
        fields["source"] = column_map.source
    width = len(fields)
    slots = {}
    for name, idx in fields.items():
        pos = idx if idx >= 0 else width + idx
        if not 0 <= pos < width or pos in slots:
            raise ValueError(f"column map is not a permutation of {width} columns")
        slots[pos] = name
    blocks = []
    for s in d.sentences:
        lines = []
        for i, tok in enumerate(s.tokens):
            values = {"token": tok, "label": s.labels[i]}
            if "source" in fields:
                src = s.source_tokens[i] if s.source_tokens else tok
                values["source"] = src or EMPTY_SOURCE
            lines.append("\t".join(values[slots[p]] for p in range(width)))
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


# -- parallel TSV -------------------------------------------------------------

def parse_parallel(text: str) -> ParallelCorpus:
    pairs = []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"expected exactly one tab, found {len(parts) - 1}", lineno)
        for part in parts:
            if has_placeholder(part):
                raise ParseError("reserved placeholder character", lineno)
        pairs.append((parts[0], parts[1]))
    return ParallelCorpus(pairs)


def write_parallel(p: ParallelCorpus) -> str:
    out = []
    for clean, noisy in p.pairs:
        for s in (clean, noisy):
            if "\t" in s or "\n" in s:
                raise ValidationError(f"sentence contains tab or newline: {s!r}")
        out.append(f"{clean}\t{noisy}\n")
    return "".join(out)


def extract_target_side(p: ParallelCorpus) -> list[str]:
    """Noisy side of each pair, in order (a corpus for noisy LM pre-training)."""
    return [noisy for _, noisy in p.pairs]


def read_lines(text: str) -> list[str]:
    """Split plain text into lines, ignoring a single trailing newline."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [line.rstrip("\r") for line in lines]


def sentences_from_text(lines: Iterable[str]) -> Dataset:
    """Unlabeled sentences (all O) from whitespace-tokenized lines."""
    return Dataset(LabeledSentence(line.split(), ["O"] * len(line.split()))
                   for line in lines if line.strip())
