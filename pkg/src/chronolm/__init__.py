"""Time-aware pretraining toolkit: temporal expression tagging, masking
objectives keyed to those expressions, a small trainable encoder with
timestamp prediction and consistency heads, and evaluation protocols for
time-sensitive tasks.
"""

from .corpus import (
    CLS,
    MASK,
    PAD,
    SEP,
    SPECIAL_TOKENS,
    UNK,
    Document,
    TokenizedDoc,
    Vocab,
    build_vocab,
    load_corpus,
    load_tagged,
    tagged_to_json,
    tokenize,
    word_spans,
)
from .errors import (
    AlignmentError,
    ChronoError,
    EmptyCorpus,
    EmptyInput,
    EmptyRange,
    GranularityRefinementError,
    InvalidTimestamp,
    LabelOutOfRange,
    MalformedRecord,
    NonFiniteGradient,
    OutOfLabelSpace,
    SequenceTooLong,
    UnknownTokenId,
    UnresolvableExpression,
    VocabMismatch,
)
from .evaluation import (
    DEFAULT_ABLATION,
    AblationRow,
    EvalSet,
    Prediction,
    RankedDates,
    accuracy,
    mae,
    mean_average_precision,
    mrr,
    probe_representation,
    random_guess,
    run_ablation,
    similarity_rank,
)
from .model import (
    AdamState,
    Batch,
    EncoderCheckpoint,
    LabeledExample,
    ModelConfig,
    TrainConfig,
    adamw_step,
    batch_losses,
    classify,
    dtp_loss,
    encode,
    encode_batch,
    finetune,
    grad_check,
    init_params,
    joint_loss,
    labeled_input_ids,
    load_checkpoint,
    mlm_loss,
    parameter_count,
    parameter_shapes,
    predict_dtp,
    prepare_labeled,
    pretrain,
    save_checkpoint,
    text_input_ids,
    tir_loss,
)
from .objectives import (
    IGNORE_INDEX,
    TIR_KEPT,
    TIR_REPLACED,
    ExpressionPool,
    LabelSpace,
    MaskAction,
    MaskPlan,
    Objective,
    PretrainExample,
    TirExample,
    TirSlot,
    apply_plan,
    build_labelspace,
    build_pretrain_example,
    build_tamlm_dtp,
    build_tir,
    collect_expression_pool,
    dtp_label,
    example_provider,
    plan_mlm,
    plan_tamlm,
)
from .synth import synth_corpus, synth_events
from .temporal import (
    Granularity,
    TemporalExpression,
    TimePoint,
    annotate,
    days_in_month,
    distance,
    is_leap_year,
    normalize,
    point_from_index,
    recognize,
    render,
    time_index,
    truncate,
)

__version__ = "0.1.0"
