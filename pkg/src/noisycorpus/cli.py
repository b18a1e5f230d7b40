"""Command line entry point: ``noisycorpus <subcommand> ...``.

Every subcommand accepts ``--config FILE`` (a JSON object whose keys are the
long option names with dashes replaced by underscores); explicit flags win
over the file. The seed falls back to ``$NOISYCORPUS_SEED`` and then to 0.
A one-line JSON manifest describing the run goes to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys

from . import __version__
from ._process import ExternalProcessError
from ._util import atomic_write
from .align import extract_word_pairs
from .corpus import (
    ColumnMap,
    CorpusError,
    ParallelCorpus,
    extract_target_side,
    parse_conll,
    parse_parallel,
    read_lines,
    write_conll,
    write_parallel,
)
from .metrics import (
    correction_accuracy,
    entity_token_error_rate,
    error_rate_histogram,
    mean_stddev,
    ner_scores,
    parallel_token_error_rate,
    tagging_accuracy,
    token_error_rate,
    welch_t_test,
)
from .noise import (
    DEFAULT_ALPHABET,
    Alphabet,
    ExternalGenerator,
    ModelError,
    dumps_model,
    estimate_confusion,
    load_model,
    perturb_token,
    train_channel,
    vanilla_from_eta,
)
from .pipeline import (
    ModelDegrader,
    apply_corrector,
    augmentation_stream,
    degrader_from_config,
    generate_parallel,
    induce_misspellings,
    parse_misspelling_table,
    synth_benchmark,
)

log = logging.getLogger("noisycorpus")

CLEAN_COLUMNS = "token=0,label=-1"
NOISY_COLUMNS = "token=0,source=1,label=-1"


class Run:
    """Resolved options plus output plumbing for one invocation."""

    def __init__(self, args, defaults: dict):
        self.args = args
        cfg = {}
        if getattr(args, "config", None):
            with open(args.config, encoding="utf-8") as f:
                cfg = json.load(f)
            if not isinstance(cfg, dict):
                raise ValueError("config file must hold a JSON object")
        opts = dict(defaults)
        opts.update({k: v for k, v in cfg.items()})
        for key, value in vars(args).items():
            if key in ("func", "config", "command_name") or value is None:
                continue
            opts[key] = value
        if opts.get("seed") is None:
            opts["seed"] = int(os.environ.get("NOISYCORPUS_SEED", 0))
        self.opts = opts
        self.counts: dict = {}

    def __getitem__(self, key):
        return self.opts.get(key)

    def read(self, path=None) -> str:
        path = path or self["input"]
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8", newline="") as f:
            return f.read()

    def emit(self, text: str, path=None) -> None:
        path = path or self["output"]
        if path and path != "-":
            atomic_write(path, text)
        else:
            sys.stdout.write(text)
            sys.stdout.flush()

    def emit_report(self, report: dict) -> None:
        if self["report"]:
            atomic_write(self["report"], json.dumps(report, indent=1, sort_keys=True) + "\n")

    def manifest(self, name: str) -> dict:
        hashed = {k: v for k, v in self.opts.items() if k not in ("output", "report", "jobs")}
        digest = hashlib.sha256(json.dumps(hashed, sort_keys=True, default=str).encode()).hexdigest()
        return {"subcommand": name, "config_hash": digest[:16], "seed": self["seed"],
                "version": __version__, "counts": self.counts}

    def columns(self, default: str) -> ColumnMap:
        return ColumnMap.parse(self["columns"] or default, bio=not self["raw_labels"])


# -- helpers ------------------------------------------------------------------

def _model(run: Run):
    spec = run["model"] or "vanilla"
    if spec == "vanilla":
        alphabet = Alphabet(tuple(run["alphabet"])) if run["alphabet"] else DEFAULT_ALPHABET
        return vanilla_from_eta(float(run["eta"] if run["eta"] is not None else 0.0), alphabet)
    if spec == "external":
        return ExternalGenerator(run["command"], run["level"] or "sentence", float(run["timeout"]))
    return load_model(spec)


def _degrader(run: Run):
    cfg = run["degrader"]
    if isinstance(cfg, str):
        if cfg.lstrip().startswith("{"):
            cfg = json.loads(cfg)
        else:
            cfg = {"kind": cfg}
    cfg = dict(cfg or {"kind": "identity"})
    if cfg["kind"] == "builtin":
        if run["intensity"]:
            cfg["intensity"] = json.loads(run["intensity"])
        elif run["rate"] is not None:
            cfg["intensity"] = {"kind": "constant", "rate": float(run["rate"])}
    if cfg["kind"] == "model" and "model" not in cfg:
        cfg["model"] = run["model"]
    if cfg["kind"] == "external" and "command" not in cfg:
        cfg["command"] = run["command"]
        cfg.setdefault("timeout", float(run["timeout"]))
    return degrader_from_config(cfg, seed=int(run["seed"]))


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


# -- subcommands --------------------------------------------------------------

def cmd_align(run: Run):
    corpus = parse_parallel(run.read())
    rep = extract_word_pairs(corpus, keep_empty=bool(run["keep_empty"]))
    run.emit("".join(f"{c}\t{n}\n" for c, n in rep.pairs))
    run.emit_report(rep.to_json())
    run.counts.update(sentence_pairs=len(corpus), word_pairs=len(rep.pairs), skipped=len(rep.skipped))


def cmd_estimate(run: Run):
    corpus = parse_parallel(run.read())
    pairs = corpus.pairs
    if run["sentences"]:
        pairs = extract_word_pairs(corpus).pairs
    alphabet = Alphabet(tuple(run["alphabet"])) if run["alphabet"] else None
    model = estimate_confusion(pairs, float(run["smoothing_k"]), alphabet)
    run.emit(dumps_model(model))
    run.counts.update(pairs=len(pairs))


def cmd_train_channel(run: Run):
    corpus = parse_parallel(run.read())
    alphabet = Alphabet(tuple(run["alphabet"])) if run["alphabet"] else None
    model = train_channel(corpus, int(run["order"]), float(run["smoothing_k"]), alphabet)
    run.emit(dumps_model(model))
    run.counts.update(pairs=len(corpus), rows=len(model.counts))


def cmd_noise(run: Run):
    lines = read_lines(run.read())
    model = _model(run)
    seed = int(run["seed"])
    if run["level"] == "token" and not isinstance(model, ExternalGenerator):
        out = [" ".join(filter(None, (perturb_token(model, w, (seed, i, j))
                                      for j, w in enumerate(line.split()))))
               for i, line in enumerate(lines)]
    else:
        out = ModelDegrader(model, seed).run(lines, int(run["jobs"]))
        for x in out:
            if isinstance(x, Exception):
                raise x
    run.emit("".join(x + "\n" for x in out))
    run.counts.update(lines=len(lines))


def cmd_gen_parallel(run: Run):
    seeds = [line for line in read_lines(run.read()) if line.strip()]
    corpus, report = generate_parallel(seeds, _degrader(run), int(run["jobs"]))
    run.emit(write_parallel(corpus))
    run.emit_report(report.to_json())
    run.counts.update(input=report.n_input, pairs=report.n_output, skipped=len(report.skipped))


def cmd_synth_benchmark(run: Run):
    d = parse_conll(run.read(), run.columns(CLEAN_COLUMNS))
    out, report = synth_benchmark(d, _degrader(run), int(run["jobs"]))
    run.emit(write_conll(out))
    run.emit_report(report.to_json())
    run.counts.update(input=report.n_input, sentences=report.n_output,
                      skipped=len(report.skipped))


def cmd_induce_typos(run: Run):
    d = parse_conll(run.read(), run.columns(CLEAN_COLUMNS))
    tables = run["table"] or []
    if isinstance(tables, str):
        tables = [tables]
    if not tables:
        raise ValueError("--table is required")
    table = parse_misspelling_table(run.read(tables[0]))
    for path in tables[1:]:
        table.merge(parse_misspelling_table(run.read(path)))
    out = induce_misspellings(d, table, float(run["p_replace"]), int(run["seed"]))
    run.emit(write_conll(out))
    run.counts.update(sentences=len(out), table_entries=len(table),
                      replaced=sum(a != b for s in out for a, b in zip(s.tokens, s.source_tokens)))


def cmd_augment(run: Run):
    d = parse_conll(run.read(), run.columns(CLEAN_COLUMNS))
    out = augmentation_stream(d, _model(run), int(run["seed"]), int(run["epoch"]),
                              run["level"] or "sentence", int(run["jobs"]))
    run.emit(write_conll(out))
    run.counts.update(sentences=len(out), epoch=int(run["epoch"]))


def cmd_correct(run: Run):
    if not run["command"]:
        raise ValueError("--command is required")
    d = parse_conll(run.read(), run.columns(NOISY_COLUMNS))
    out, report = apply_corrector(run["command"], d, float(run["timeout"]))
    run.emit(write_conll(out))
    run.emit_report(report.to_json())
    run.counts.update(sentences=len(out), skipped=len(report.skipped))


def _load_noisy(run: Run, path=None):
    text = run.read(path)
    if run["parallel"]:
        return parse_parallel(text)
    return parse_conll(text, run.columns(NOISY_COLUMNS))


def cmd_stats(run: Run):
    fold = bool(run["fold_case"])
    if run["scores"]:
        a = _floats(run.read(run["scores"]))
        summary = mean_stddev(a)
        result = {"mean": summary.mean, "stddev": summary.stddev, "n_runs": summary.n_runs}
        if run["compare"]:
            b = _floats(run.read(run["compare"]))
            w = welch_t_test(a, b)
            result["welch"] = {"t": w.t, "p": w.p, "df": w.df, "degenerate": w.degenerate,
                               "significant": w.p < float(run["alpha"])}
        run.emit(json.dumps(result, indent=1, sort_keys=True) + "\n")
        run.counts.update(runs=summary.n_runs)
        return
    if not run["input"]:
        raise ValueError("an input corpus or --scores is required")
    data = _load_noisy(run)
    hist = error_rate_histogram(data, fold)
    run.counts.update(sentences=hist.n_sentences)
    if run["histogram"] and not run["json"]:
        run.emit(hist.to_csv())
        return
    if isinstance(data, ParallelCorpus):
        summary = {"ter": parallel_token_error_rate(data, fold)}
    else:
        summary = {"ter": token_error_rate(data, fold), "tokens": data.num_tokens()}
        if any(l != "O" for s in data for l in s.labels):
            summary["entity_ter"] = entity_token_error_rate(data, fold)
    summary.update(sentences=hist.n_sentences, histogram=hist.to_json())
    run.emit(json.dumps(summary, indent=1, sort_keys=True) + "\n")


def cmd_eval(run: Run):
    metric = run["metric"]
    if metric == "acc":
        noisy = parse_conll(run.read(run["gold"]), run.columns(NOISY_COLUMNS))
        corrected = parse_conll(run.read(run["pred"]), run.columns(NOISY_COLUMNS))
        result = {"acc": correction_accuracy(noisy, corrected, bool(run["fold_case"]))}
    else:
        cmap = run.columns(CLEAN_COLUMNS)
        if metric == "accuracy":
            cmap = ColumnMap(cmap.token, cmap.label, cmap.source, bio=False)
        gold = parse_conll(run.read(run["gold"]), cmap)
        pred = parse_conll(run.read(run["pred"]), cmap)
        if metric == "f1":
            s = ner_scores(gold, pred)
            result = {"f1": s.f1, "precision": s.precision, "recall": s.recall,
                      "tp": s.tp, "fp": s.fp, "fn": s.fn}
        else:
            result = {"accuracy": tagging_accuracy(gold, pred)}
    run.emit(json.dumps(result, indent=1, sort_keys=True) + "\n")
    run.counts.update(result)


def cmd_export_nlm_corpus(run: Run):
    corpus = parse_parallel(run.read())
    lines = extract_target_side(corpus)
    run.emit("".join(x + "\n" for x in lines))
    run.counts.update(lines=len(lines))


# -- parser -------------------------------------------------------------------

def _common(p, output=True, report=False):
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--seed", type=int, help="random seed (default: $NOISYCORPUS_SEED or 0)")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    if output:
        p.add_argument("-o", "--output", help="output file (default: stdout)")
    if report:
        p.add_argument("--report", help="write a JSON report here")


def _columns(p):
    p.add_argument("--columns", help="column map, e.g. token=0,source=1,label=-1")
    p.add_argument("--raw-labels", action="store_true", default=None,
                   help="keep labels verbatim instead of validating BIO")


def _degrader_opts(p):
    p.add_argument("--degrader", help="identity | builtin | model | external, or a JSON object")
    p.add_argument("--rate", type=float, help="constant token error rate for the builtin degrader")
    p.add_argument("--intensity", help="intensity distribution as JSON for the builtin degrader")
    p.add_argument("--model", help="model JSON path for the model degrader")
    p.add_argument("--command", help="command line of an external degrader")
    p.add_argument("--timeout", type=float, help="seconds before an external command is killed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisycorpus", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command_name", metavar="SUBCOMMAND")
    sub.required = True
    commands = {}

    def add(name, func, help, defaults=None):
        p = sub.add_parser(name, help=help, description=help)
        p.set_defaults(func=func)
        commands[name] = defaults or {}
        return p

    p = add("align", cmd_align, "align sentence pairs and write word pairs (TSV)")
    p.add_argument("input", help="parallel corpus TSV (clean<TAB>noisy)")
    p.add_argument("--keep-empty", action="store_true", default=None,
                   help="also write pairs with an empty side")
    _common(p, report=True)

    p = add("estimate", cmd_estimate, "estimate a confusion-matrix model",
            {"smoothing_k": 0.1})
    p.add_argument("input", help="word pairs TSV (or sentence pairs with --sentences)")
    p.add_argument("--sentences", action="store_true", default=None,
                   help="input holds sentence pairs; align them first")
    p.add_argument("--smoothing-k", type=float, help="add-k smoothing (default 0.1)")
    p.add_argument("--alphabet", help="alphabet characters (default: observed)")
    _common(p)

    p = add("train-channel", cmd_train_channel, "train the context channel error model",
            {"order": 3, "smoothing_k": 0.1})
    p.add_argument("input", help="parallel corpus TSV")
    p.add_argument("--order", type=int, help="context length 0-4 (default 3)")
    p.add_argument("--smoothing-k", type=float, help="add-k smoothing (default 0.1)")
    p.add_argument("--alphabet", help="alphabet characters (default: observed)")
    _common(p)

    p = add("noise", cmd_noise, "noise plain-text sentences, one per line",
            {"model": "vanilla", "eta": 0.0, "level": "sentence", "timeout": 600.0})
    p.add_argument("input", help="text file, one sentence per line")
    p.add_argument("--model", help="'vanilla', 'external', or a model JSON path")
    p.add_argument("--eta", type=float, help="vanilla edit probability (default 0)")
    p.add_argument("--alphabet", help="vanilla alphabet characters")
    p.add_argument("--level", choices=["sentence", "token"], help="noise whole lines or words")
    p.add_argument("--command", help="generator command for --model external")
    p.add_argument("--timeout", type=float, help="external command timeout in seconds")
    _common(p)

    p = add("gen-parallel", cmd_gen_parallel, "build a parallel corpus with a degrader",
            {"degrader": "identity", "timeout": 3600.0})
    p.add_argument("input", help="seed corpus, one sentence per line")
    _degrader_opts(p)
    _common(p, report=True)

    p = add("synth-benchmark", cmd_synth_benchmark, "noisy copy of a CoNLL dataset with transferred labels",
            {"degrader": "identity", "timeout": 3600.0})
    p.add_argument("input", help="CoNLL file")
    _degrader_opts(p)
    _columns(p)
    _common(p, report=True)

    p = add("induce-typos", cmd_induce_typos, "replace words with misspellings from lookup tables",
            {"p_replace": 0.1})
    p.add_argument("input", help="CoNLL file")
    p.add_argument("--table", action="append", help="misspelling TSV (repeatable; lists are merged)")
    p.add_argument("--p-replace", type=float, help="replacement probability (default 0.1)")
    _columns(p)
    _common(p)

    p = add("augment", cmd_augment, "noisy training copy of a CoNLL dataset for one epoch",
            {"model": "vanilla", "eta": 0.1, "epoch": 0, "level": "sentence", "timeout": 600.0})
    p.add_argument("input", help="CoNLL file")
    p.add_argument("--model", help="'vanilla', 'external', or a model JSON path")
    p.add_argument("--eta", type=float, help="vanilla edit probability (default 0.1)")
    p.add_argument("--alphabet", help="vanilla alphabet characters")
    p.add_argument("--epoch", type=int, help="epoch number (default 0)")
    p.add_argument("--level", choices=["sentence", "token"], help="sentence- or token-level noising")
    p.add_argument("--command", help="generator command for --model external")
    p.add_argument("--timeout", type=float, help="external command timeout in seconds")
    _columns(p)
    _common(p)

    p = add("correct", cmd_correct, "run an external text corrector over a noisy CoNLL dataset",
            {"timeout": 3600.0})
    p.add_argument("input", help="noisy CoNLL file")
    p.add_argument("--command", help="corrector command line")
    p.add_argument("--timeout", type=float, help="seconds before the corrector is killed")
    _columns(p)
    _common(p, report=True)

    p = add("stats", cmd_stats, "token error rates and error-rate histogram, or run statistics",
            {"alpha": 0.05})
    p.add_argument("input", nargs="?", help="noisy CoNLL file (or parallel TSV with --parallel)")
    p.add_argument("--parallel", action="store_true", default=None, help="input is a parallel TSV")
    p.add_argument("--histogram", action="store_true", default=None, help="write the histogram as CSV")
    p.add_argument("--json", action="store_true", default=None, help="write everything as JSON")
    p.add_argument("--fold-case", action="store_true", default=None,
                   help="ignore case differences when comparing tokens")
    p.add_argument("--scores", help="file of run scores: mean and sample stddev")
    p.add_argument("--compare", help="second score file: Welch's t-test against --scores")
    p.add_argument("--alpha", type=float, help="significance level (default 0.05)")
    _columns(p)
    _common(p)

    p = add("eval", cmd_eval, "score predictions (F1, accuracy) or corrections (ACC)",
            {"metric": "f1"})
    p.add_argument("gold", help="gold CoNLL (for acc: the noisy dataset)")
    p.add_argument("pred", help="predicted CoNLL (for acc: the corrected dataset)")
    p.add_argument("--metric", choices=["f1", "accuracy", "acc"], help="default f1")
    p.add_argument("--fold-case", action="store_true", default=None,
                   help="ignore case differences (acc only)")
    _columns(p)
    _common(p)

    p = add("export-nlm-corpus", cmd_export_nlm_corpus, "write the noisy side of a parallel corpus")
    p.add_argument("input", help="parallel corpus TSV")
    _common(p)

    parser.set_defaults(_defaults=commands)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    defaults = args._defaults[args.command_name]
    del args._defaults
    del args.verbose
    try:
        run = Run(args, {"jobs": 1, **defaults})
        args.func(run)
    except (CorpusError, ModelError, ExternalProcessError, OSError, ValueError, KeyError) as e:
        print(f"noisycorpus {args.command_name}: error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(run.manifest(args.command_name), sort_keys=True), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
