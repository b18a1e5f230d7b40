"""Noisy-text corpora for robust sequence labeling.

Align clean and noisy sentences, estimate character-level error models from
them, sample new noisy text, transfer token labels onto noisy copies of a
labeled dataset, and score the results.
"""

__version__ = "0.1.0"

from .align import (
    EditOp,
    EditScript,
    Op,
    WordAlignment,
    align_words,
    edit_script,
    extract_word_pairs,
    levenshtein,
    transfer,
    transfer_labels,
)
from .corpus import (
    ColumnMap,
    CorpusError,
    Dataset,
    LabeledSentence,
    ParallelCorpus,
    ParseError,
    ValidationError,
    parse_conll,
    parse_parallel,
    write_conll,
    write_parallel,
)
from .metrics import (
    correction_accuracy,
    entity_token_error_rate,
    error_rate_histogram,
    mean_stddev,
    ner_f1,
    tagging_accuracy,
    token_error_rate,
    welch_t_test,
)
from .noise import (
    Alphabet,
    ChannelModel,
    ConfusionModel,
    ExternalGenerator,
    IntensityDistribution,
    VanillaModel,
    decode_from_seq2seq,
    encode_for_seq2seq,
    estimate_confusion,
    load_model,
    perturb,
    save_model,
    train_channel,
    vanilla_from_eta,
)
from .pipeline import (
    apply_corrector,
    augmentation_stream,
    builtin_degrader,
    generate_parallel,
    induce_misspellings,
    synth_benchmark,
)
