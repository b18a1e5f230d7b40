"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line in the summary.

Run with ``pytest tests/test_acceptance.py -v``; the lines appear under
"acceptance criteria" at the end of the session.
"""

import functools
import itertools
import math
import os
import random
import string
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from noisycorpus.align import Op, edit_script
from noisycorpus.cli import main as cli_main
from noisycorpus.corpus import (
    NOISY_COLUMNS,
    Dataset,
    LabeledSentence,
    ParallelCorpus,
    normalize_bio,
    parse_conll,
    write_conll,
)
from noisycorpus.metrics import (
    error_rate_histogram,
    extract_spans,
    ner_f1,
    parallel_token_error_rate,
    welch_t_test,
)
from noisycorpus.noise import (
    EPS,
    Alphabet,
    ConfusionModel,
    IntensityDistribution,
    decode_from_seq2seq,
    dumps_model,
    encode_for_seq2seq,
    estimate_confusion,
    loads_model,
    model_to_dict,
    sample_edits,
    train_channel,
    vanilla_from_eta,
)
from noisycorpus.pipeline import (
    Degrader,
    ModelDegrader,
    builtin_degrader,
    generate_parallel,
    synth_benchmark,
)

from conftest import ACCEPTANCE, CLEAN_CONLL, NOISY_CONLL, NOISY_SENTENCE
from synthetic import make_sentences


class Criterion:
    def __init__(self):
        self.parts = []
        self.failures = []

    def check(self, ok, text):
        self.parts.append(text if ok else f"{text} [FAILED]")
        if not ok:
            self.failures.append(text)


@contextmanager
def criterion(key, title):
    c = Criterion()
    try:
        yield c
    except Exception as e:
        ACCEPTANCE[key] = (False, title, "; ".join(c.parts + [f"error: {e!r}"]))
        raise
    ACCEPTANCE[key] = (not c.failures, title, "; ".join(c.parts))
    print(f"{key} {'PASS' if not c.failures else 'FAIL'}  {title}: {'; '.join(c.parts)}")
    assert not c.failures, "; ".join(c.failures)


# -- C1 -----------------------------------------------------------------------

@functools.cache
def brute_distance(a: str, b: str) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(brute_distance(a[1:], b) + 1,
               brute_distance(a, b[1:]) + 1,
               brute_distance(a[1:], b[1:]) + (a[0] != b[0]))


def test_c1_edit_distance_oracle():
    with criterion("C1", "edit distance vs recursive oracle") as c:
        start = time.perf_counter()
        grid = ["".join(p) for n in range(5) for p in itertools.product("abcd", repeat=n)]
        rng = random.Random(1)

        def word():
            return "".join(rng.choice("abcd") for _ in range(rng.randint(0, 8)))

        pairs = [(a, b) for a in grid for b in grid] + [(word(), word()) for _ in range(20000)]
        wrong_cost = wrong_replay = 0
        for a, b in pairs:
            s = edit_script(a, b)
            wrong_cost += s.cost != brute_distance(a, b) or \
                s.cost != sum(op.kind is not Op.MATCH for op in s.ops)
            wrong_replay += s.apply(a) != b
        elapsed = time.perf_counter() - start
        c.check(wrong_cost == 0, f"{len(pairs)} pairs (all of length <= 4 plus 20000 random "
                                 f"up to 8), {wrong_cost} cost mismatches")
        c.check(wrong_replay == 0, f"{wrong_replay} replay failures")
        c.check(elapsed < 30, f"{elapsed:.1f} s")


# -- C2 -----------------------------------------------------------------------

class PrintedNoise(Degrader):
    def run(self, sentences, jobs=1):
        return [NOISY_SENTENCE for _ in sentences]


def test_c2_label_transfer_golden():
    with criterion("C2", "label transfer golden rows") as c:
        out, report = synth_benchmark(parse_conll(CLEAN_CONLL), PrintedNoise())
        text = write_conll(out)
        c.check(text == NOISY_CONLL, "byte-exact noisy CoNLL rows")
        c.check(out.sentences[0].labels[5:7] == ("B-LOC", "I-LOC"), "New Vork keeps B-LOC I-LOC")
        c.check(not report.skipped, "no skipped sentences")


# -- C3 -----------------------------------------------------------------------

def _edit_fraction(model, n_chars, seed):
    rng = random.Random(seed)
    text = "".join(rng.choice(model.alphabet.chars) for _ in range(n_chars))
    ops = sample_edits(model, text, seed)
    # a trailing insertion belongs to the end gap, not to a character
    if ops and ops[-1][0] is Op.INSERT:
        ops = ops[:-1]
    return sum(kind is not Op.MATCH for kind, _, _ in ops) / n_chars


def test_c3_vanilla_equal_masses():
    with criterion("C3", "vanilla model masses and edit fraction") as c:
        rng = random.Random(3)
        pool = string.ascii_letters + string.digits + string.punctuation
        worst_mass = worst_mc = 0.0
        for i in range(100):
            eta = rng.random()
            alphabet = Alphabet(tuple(rng.sample(pool, rng.randint(2, 60))))
            m = vanilla_from_eta(eta, alphabet)
            ins = math.fsum(m.insertion_distribution().values())
            for ch in alphabet:
                sub = math.fsum(m.substitution_distribution(ch).values())
                dele = m.deletion_probability(ch)
                for mass in (ins, sub, dele):
                    worst_mass = max(worst_mass, abs(mass - eta / 3))
            worst_mc = max(worst_mc, abs(_edit_fraction(m, 100_000, i) - eta))
        c.check(worst_mass <= 1e-12, f"100 configs, max |mass - eta/3| = {worst_mass:.1e}")
        c.check(worst_mc <= 0.01, f"max |edit fraction - eta| over 10^5 chars = {worst_mc:.4f}")


# -- C4 -----------------------------------------------------------------------

def random_confusion_model(rng, chars="abcdefgh"):
    subst = {}
    for ch in chars:
        err = rng.uniform(0.03, 0.15)
        targets = [x for x in chars if x != ch] + [EPS]
        w = [rng.random() for _ in targets]
        row = {t: err * x / sum(w) for t, x in zip(targets, w)}
        row[ch] = 1 - err
        subst[ch] = row
    w = [rng.random() for _ in chars]
    ins = {ch: x / sum(w) for ch, x in zip(chars, w)}
    return ConfusionModel(subst, ins, 0.02, Alphabet(tuple(chars)))


def test_c4_estimation_consistency():
    with criterion("C4", "confusion model re-estimation") as c:
        start = time.perf_counter()
        rng = random.Random(4)
        true = random_confusion_model(rng)
        chars = true.alphabet.chars
        pairs = []
        for i in range(100_000):
            w = "".join(rng.choice(chars) for _ in range(rng.randint(3, 8)))
            pairs.append((w, "".join(d for _, _, d in sample_edits(true, w, (4, i)) if d)))
        est = estimate_confusion(pairs, smoothing_k=0, alphabet=true.alphabet)
        elapsed = time.perf_counter() - start

        def l1(p, q):
            return sum(abs(p.get(t, 0.0) - q.get(t, 0.0)) for t in set(p) | set(q))

        worst = max(l1(true.subst[ch], est.subst[ch]) for ch in chars)
        c.check(worst <= 0.02, f"max per-row L1 = {worst:.4f} over {len(chars)} rows")
        c.check(elapsed < 60, f"{elapsed:.1f} s")
        # reported, not gated: insertion next to a substitution is attributed by the tie-break
        c.check(True, f"insertion distribution L1 = {l1(true.ins, est.ins):.4f}, "
                      f"rate {est.ins_rate:.4f} vs {true.ins_rate}")


# -- C5 -----------------------------------------------------------------------

def _histogram(model, seed):
    sentences = make_sentences(10_000, seed=seed)
    noisy = ModelDegrader(model, seed).run(sentences)
    return error_rate_histogram(ParallelCorpus(list(zip(sentences, noisy)))).bins


def test_c5_error_distribution_shapes():
    with criterion("C5", "error distribution shapes") as c:
        interior = 0
        shapes = []
        for seed in range(10):
            bins = _histogram(vanilla_from_eta(0.2), seed)
            interior += int(np.argmax(bins)) > 0
            shapes.append(int(np.argmax(bins)))
        for eta in (0.3, 0.5):
            bins = _histogram(vanilla_from_eta(eta), 0)
            interior += int(np.argmax(bins)) > 0
            shapes.append(int(np.argmax(bins)))
        c.check(interior == 12, f"vanilla: interior mode on {interior}/12 runs "
                                f"(eta 0.2 x 10 seeds, 0.3, 0.5), mode bins {shapes}")

        corpus, _ = generate_parallel(make_sentences(3000, seed=100),
                                      builtin_degrader(IntensityDistribution.geometric(0.5), seed=7))
        channel = train_channel(corpus, order=3)
        broken = {}
        for seed in range(10):
            bins = _histogram(channel, seed)
            if any(a < b for a, b in zip(bins, bins[1:])):
                broken[seed] = [round(x, 2) for x in bins]
        c.check(not broken, f"channel: non-increasing on {10 - len(broken)}/10 seeds"
                            + "".join(f", seed {k}: {v}" for k, v in broken.items()))


# -- C6 -----------------------------------------------------------------------

TAGS = ("O", "B-A", "I-A", "B-B", "I-B")
SPAN_BITS = {(t, i, j): k for k, (t, i, j) in enumerate(
    (t, i, j) for t in "AB" for i in range(6) for j in range(i, 6))}


def oracle_spans(labels):
    """Every (type, i, j) checked against the definition of a maximal chunk."""
    n = len(labels)
    spans = set()
    for t in "AB":
        for i in range(n):
            prev = labels[i - 1] if i else "O"
            opens = labels[i] == f"B-{t}" or (labels[i] == f"I-{t}" and prev not in (f"B-{t}", f"I-{t}"))
            for j in range(i, n):
                inside = all(labels[k] == f"I-{t}" for k in range(i + 1, j + 1))
                closed = j + 1 == n or labels[j + 1] != f"I-{t}"
                if opens and inside and closed:
                    spans.add((t, i, j))
    return spans


def _f1(tp, fp, fn):
    return 2 * tp / (2 * tp + fp + fn) if tp else 0.0


def test_c6_f1_oracle():
    with criterion("C6", "entity F1 vs span oracle") as c:
        rng = np.random.default_rng(6)
        wrong_spans = wrong_pooled = 0
        n_gold = n_pairs = 0
        sample_pairs = []
        for n in range(1, 7):
            seqs = [tuple(TAGS[k] for k in p) for p in itertools.product(range(5), repeat=n)]
            oracle = [oracle_spans(s) for s in seqs]
            wrong_spans += sum(extract_spans(s) != o for s, o in zip(seqs, oracle))
            masks = np.array([sum(1 << SPAN_BITS[x] for x in o) for o in oracle], dtype=np.uint64)
            sizes = np.bitwise_count(masks).astype(np.int64)
            sents = [LabeledSentence(("w",) * n, s) for s in seqs]
            preds = rng.integers(0, len(seqs), size=(len(seqs), 200))
            for g, idx in enumerate(preds):
                tp = int(np.bitwise_count(masks[g] & masks[idx]).sum())
                fp = int(sizes[idx].sum()) - tp
                fn = 200 * int(sizes[g]) - tp
                got = ner_f1(Dataset([sents[g]] * 200), Dataset([sents[i] for i in idx]))
                wrong_pooled += abs(got - _f1(tp, fp, fn)) > 1e-12
                if rng.random() < 0.05:
                    sample_pairs.append((sents[g], sents[idx[0]], oracle[g], oracle[idx[0]]))
            n_gold += len(seqs)
            n_pairs += preds.size
        wrong_pair = 0
        for gs, ps, go, po in sample_pairs:
            tp = len(go & po)
            wrong_pair += abs(ner_f1(Dataset([gs]), Dataset([ps])) - _f1(tp, len(po) - tp, len(go) - tp)) > 1e-12
        c.check(wrong_spans == 0, f"span sets of all {n_gold} sequences up to length 6: {wrong_spans} wrong")
        c.check(wrong_pooled == 0, f"pooled F1 of {n_gold} golds x 200 predictions "
                                   f"({n_pairs} pairs): {wrong_pooled} wrong")
        c.check(wrong_pair == 0, f"single-pair F1 on {len(sample_pairs)} sampled pairs: {wrong_pair} wrong")


# -- C7 -----------------------------------------------------------------------

# (a, b, t, two-sided p) with p computed by high-precision quadrature of the t density
WELCH_REFERENCE = [
    ([1, 2, 3, 4, 5], [2, 3, 4, 5, 6], -1.0, 0.3465935070873343),
    ([92.74, 93.15, 95.55], [97.8, 97.72, 95.57, 96.54, 98.61], -3.3471369342160417, 0.034802106496645044),
    ([80.97, 80.2, 80.73, 81.02, 79.93, 79.32, 79.52], [81.08, 79.7], -0.20147032164636441, 0.8672301193515843),
    ([83.27, 81.62, 83.27], [80.2, 79.54], 4.443372433237743, 0.02215123750547101),
    ([83.21, 84.54, 84.29, 84.8, 84.47, 85.17, 84.47, 85.43],
     [85.37, 84.17, 85.47, 85.49, 85.8, 85.73, 86.09, 86.04], -3.0580124837901725, 0.008585951328697418),
    ([92.3, 91.42, 91.74], [94.09, 92.15, 90.7, 97.47, 93.55], -1.5235622031614042, 0.19592124147953804),
    ([89.15, 91.74, 87.19, 88.97], [92.41, 92.2, 92.94, 90.71, 87.26], -1.3227716371610916, 0.22758150375880443),
    ([86.26, 85.77, 85.26], [92.34, 87.2, 91.13, 88.97, 95.13], -3.712993095040641, 0.017761958784580326),
    ([90.25, 86.39], [91.43, 91.76, 91.71, 91.68, 91.71, 91.62], -1.7257157245957164, 0.33411447247399756),
    ([86.83, 86.42, 87.09], [88.97, 88.61, 88.56], -8.265496977946649, 0.002110167070096967),
    ([86.8, 85.39, 86.49, 81.56], [82.63, 83.65, 84.45, 83.86, 81.47, 81.82, 81.84],
     1.7466134246990201, 0.15878742866683945),
    ([93.67, 94.27, 95.62, 91.67, 94.97, 95.21], [92.42, 91.72, 91.84], 3.587993672387513, 0.011005735177043306),
    ([85.39, 85.1, 83.84, 85.79, 84.82, 84.63, 85.04, 85.07], [83.25, 80.01, 83.19, 83.26],
     3.0474805305297186, 0.0474492158248474),
    ([82.59, 82.56], [80.42, 78.99, 80.36, 78.67, 79.82, 81.21, 82.08], 5.205994930547004, 0.001989826760746306),
    ([90.28, 87.11, 89.2, 86.86, 91.52], [88.2, 88.11], 0.9316237599169968, 0.40402467386744484),
    ([89.14, 89.45, 89.41, 89.52, 88.31, 88.58, 89.45, 88.92], [90.83, 90.68, 91.89, 92.55, 89.33],
     -3.4053066669730874, 0.02118225449120531),
    ([82.89, 81.03, 82.35, 82.86, 85.01, 85.3, 82.72, 84.75], [81.56, 79.29, 81.93, 76.96, 81.02, 78.1, 79.57, 80.7],
     4.278841896389969, 0.0007999017931289503),
    ([86.58, 86.46, 86.37, 86.53, 86.16, 86.47], [84.07, 90.53, 87.16, 89.88, 90.02],
     -1.562446575702745, 0.19286439318889956),
    ([91.1, 92.97], [89.93, 90.35, 92.72, 91.2, 92.81, 92.31, 90.35, 90.59], 0.7364547050201175, 0.5638380077028011),
    ([91.79, 93.51, 95.28, 91.95], [92.96, 92.38, 94.48, 91.93, 92.98, 93.21], 0.16048631272013927, 0.8800016320569453),
]

# the value listed for the first pair in the requirements
LISTED_FIRST_PAIR_P = 0.3632


def test_c7_welch_reference():
    with criterion("C7", "Welch t-test vs reference") as c:
        worst_p = worst_t = 0.0
        for a, b, t, p in WELCH_REFERENCE:
            r = welch_t_test(a, b)
            worst_p = max(worst_p, abs(r.p - p))
            worst_t = max(worst_t, abs(r.t - t))
        c.check(worst_p <= 1e-3, f"20 reference pairs, max |dp| = {worst_p:.1e}, max |dt| = {worst_t:.1e}")
        same = welch_t_test([3.1, 2.7, 3.3], [3.1, 2.7, 3.3])
        c.check((same.t, same.p) == (0.0, 1.0), "identical samples give t=0, p=1")
        first = welch_t_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6]).p
        c.check(abs(first - LISTED_FIRST_PAIR_P) <= 1e-3,
                f"listed p {LISTED_FIRST_PAIR_P} for [1..5] vs [2..6]: got {first:.4f}")


# -- C8 -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def cli_fixtures(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    sentences = make_sentences(30, seed=8)
    rng = random.Random(8)
    labeled = []
    for s in sentences:
        toks = s.split()
        labels = normalize_bio([rng.choice(["O", "O", "O", "B-LOC", "I-LOC", "B-PER"]) for _ in toks])
        labeled.append(LabeledSentence(toks, labels))
    clean = Dataset(labeled)
    noisy, _ = synth_benchmark(clean, builtin_degrader(IntensityDistribution.constant(0.3), seed=8))
    parallel, _ = generate_parallel(sentences, builtin_degrader(IntensityDistribution.geometric(0.5), seed=8))
    files = {
        "text": "\n".join(sentences) + "\n",
        "clean.conll": write_conll(clean),
        "noisy.conll": write_conll(noisy),
        "parallel.tsv": "".join(f"{a}\t{b}\n" for a, b in parallel),
        "pairs.tsv": "York\tVork\nnew\tnzw\nfixtures\tfixtuvzs\nfrom\tfrom\n",
        "table.tsv": "the\tthc\nand\tnnd\n",
        "scores_a": "92.1 92.5 91.8 92.9 92.0\n",
        "scores_b": "91.0 91.4 90.8 91.9 91.2\n",
        "fix.py": "import sys\nfor line in sys.stdin:\n    sys.stdout.write(line.replace('c', 'e'))\n",
    }
    paths = {}
    for name, text in files.items():
        (d / name).write_text(text, encoding="utf-8")
        paths[name] = str(d / name)
    paths["channel.json"] = str(d / "channel.json")
    assert cli_main(["train-channel", paths["parallel.tsv"], "--order", "2", "-o", paths["channel.json"]]) == 0
    return paths


def _runs(f):
    return {
        "align": ["align", f["parallel.tsv"]],
        "estimate": ["estimate", f["pairs.tsv"]],
        "train-channel": ["train-channel", f["parallel.tsv"], "--order", "2"],
        "noise": ["noise", f["text"], "--eta", "0.3", "--seed", "4"],
        "noise-channel": ["noise", f["text"], "--model", f["channel.json"], "--seed", "4"],
        "gen-parallel": ["gen-parallel", f["text"], "--degrader", "builtin", "--rate", "0.3", "--seed", "4"],
        "synth-benchmark": ["synth-benchmark", f["clean.conll"], "--degrader", "builtin",
                            "--intensity", '{"kind": "geometric", "ratio": 0.5}', "--seed", "4"],
        "induce-typos": ["induce-typos", f["clean.conll"], "--table", f["table.tsv"], "--p-replace", "0.5"],
        "augment": ["augment", f["clean.conll"], "--eta", "0.3", "--epoch", "2"],
        "correct": ["correct", f["noisy.conll"], "--command", f"{sys.executable} {f['fix.py']}"],
        "stats": ["stats", f["noisy.conll"]],
        "stats-scores": ["stats", "--scores", f["scores_a"], "--compare", f["scores_b"]],
        "eval": ["eval", f["clean.conll"], f["noisy.conll"]],
        "export-nlm-corpus": ["export-nlm-corpus", f["parallel.tsv"]],
    }


def _cli(argv, hash_seed):
    env = {k: v for k, v in os.environ.items() if k != "NOISYCORPUS_SEED"}
    env["PYTHONHASHSEED"] = str(hash_seed)
    proc = subprocess.run([sys.executable, "-m", "noisycorpus.cli", *argv],
                          capture_output=True, env=env, timeout=300)
    return proc.returncode, proc.stdout, proc.stderr


def random_dataset(rng):
    chars = [ch for ch in string.printable + "äßéçØ漢字" if not ch.isspace()]
    sentences = []
    for _ in range(rng.randint(1, 5)):
        n = rng.randint(1, 8)
        tokens = ["".join(rng.choice(chars) for _ in range(rng.randint(1, 6))) for _ in range(n)]
        labels = normalize_bio([rng.choice(["O", "B-PER", "I-PER", "I-LOC"]) for _ in range(n)])
        sources = ["".join(rng.choice(chars) for _ in range(rng.randint(0, 4))) for _ in range(n)]
        sources[0] = sources[0] or "x"
        sentences.append(LabeledSentence(tokens, labels, sources))
    return Dataset(sentences)


def random_text(rng):
    out = []
    for _ in range(rng.randint(0, 40)):
        if rng.random() < 0.2:
            out.append(" ")
            continue
        while True:
            ch = chr(rng.randint(0x21, 0x2FFF))
            if not ch.isspace() and ch not in "¬¦":
                break
        out.append(ch)
    return "".join(out)


def test_c8_determinism_and_round_trips(cli_fixtures):
    with criterion("C8", "determinism and round trips") as c:
        runs = _runs(cli_fixtures)
        unstable = []
        failed = []
        for name, argv in runs.items():
            results = [_cli(argv, k) for k in (0, 1, 2)]
            if any(code != 0 for code, _, _ in results):
                failed.append(name)
            elif len({(out, err) for _, out, err in results}) != 1:
                unstable.append(name)
        c.check(not failed, f"{len(runs)} CLI runs, exit failures: {failed or 'none'}")
        c.check(not unstable, f"3 runs each (hash seeds 0, 1, 2), differing outputs: {unstable or 'none'}")

        rng = random.Random(8)
        texts = [random_text(rng) for _ in range(10_000)]
        bad = sum(decode_from_seq2seq(encode_for_seq2seq(t)) != t for t in texts)
        c.check(bad == 0, f"encode/decode on 10^4 strings: {bad} mismatches")

        bad = 0
        for _ in range(300):
            d = random_dataset(rng)
            bad += parse_conll(write_conll(d), NOISY_COLUMNS) != d
        c.check(bad == 0, f"CoNLL round trip on 300 random datasets: {bad} mismatches")

        channel = loads_model(open(cli_fixtures["channel.json"], encoding="utf-8").read())
        models = [vanilla_from_eta(0.3), random_confusion_model(random.Random(8)),
                  estimate_confusion([("York", "Vork"), ("new", "nzw")]), channel]
        bad = 0
        for m in models:
            text = dumps_model(m)
            back = loads_model(text)
            same = dumps_model(back) == text and model_to_dict(back) == model_to_dict(m)
            same &= sample_edits(back, "New York city", 5) == sample_edits(m, "New York city", 5)
            bad += not same
        c.check(bad == 0, f"model JSON round trip on {len(models)} models: {bad} mismatches")


# -- C9 -----------------------------------------------------------------------

def test_c9_pipeline_ter_control():
    with criterion("C9", "builtin degrader TER control") as c:
        sentences = make_sentences(10_000, seed=9)
        clean = Dataset([LabeledSentence(s.split(), ["O"] * len(s.split())) for s in sentences])
        degrader = builtin_degrader(IntensityDistribution.constant(0.15), seed=9)
        _, report = synth_benchmark(clean, degrader)
        corpus, _ = generate_parallel(sentences, degrader)
        ter = report.extra["ter"]
        parallel_ter = parallel_token_error_rate(corpus)
        c.check(abs(ter - 0.15) <= 0.02, f"benchmark TER {ter:.4f}")
        c.check(abs(parallel_ter - 0.15) <= 0.02, f"parallel-corpus TER {parallel_ter:.4f}")
        c.check(not report.skipped, f"{len(report.skipped)} skipped")
