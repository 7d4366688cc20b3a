"""SSVEP frequency detection toolkit.

Detects which flickering-stimulus frequency an EEG recording responds
to, using triangular bio-inspired filter banks, with spectral peak
matching (PSDA) and canonical correlation (CCA) baselines, a per-subject
trainer, and an accuracy / mean-detection-time / ITR evaluation harness.
"""

from .baselines import (
    CcaSolution,
    PsdaConfig,
    ReferenceSet,
    build_references,
    cca_detect_trial,
    cca_max_correlation,
    cca_pick,
    psda_detect_trial,
    psda_pick,
    reference_set,
)
from .decision import (
    DecisionState,
    Detected,
    DetectionResult,
    Pending,
    TimedOut,
    WindowPick,
    resolve_picks,
)
from .filterbank import (
    ClassScores,
    FilterBank,
    TriangularFilter,
    class_scores,
    detect_trial,
    filter_response,
    load_bank_config,
    pick_frequency,
    save_bank_config,
    seeded_bank,
)
from .metrics import (
    SubjectReport,
    TrialOutcome,
    accuracy,
    aggregate_report,
    itr,
    mean_detection_time,
)
from .signals import (
    PreprocessConfig,
    SampledSignal,
    Spectrum,
    WindowPlan,
    bandpass,
    magnitude_spectrum,
    normalize,
    sliding_windows,
)
from .training import LabeledTrial, TrainingGrid, train_filter_bank

__version__ = "0.1.0"
