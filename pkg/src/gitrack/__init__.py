"""Online HMM smoothing of per-frame GI-tract stage classifications."""

from .calibration import CalibrationResult, GridSpec, build_model, grid_search
from .hmm import (
    HmmModel,
    LogModel,
    Stage,
    bidiagonal_transition,
    brute_force_decode,
    confusion_matrix,
    path_log_likelihood,
    validate_model,
    viterbi_decode,
)
from .metrics import AggregateMetrics, StudyMetrics, aggregate, study_metrics
from .simulate import SimConfig, generate_corpus, generate_study
from .streaming import (
    DecoderConfig,
    EmitMode,
    FrameDecision,
    StreamingDecoder,
    TransitionEvent,
    decode_study,
    new_decoder,
)
from .study import Study

__version__ = "0.1.0"
