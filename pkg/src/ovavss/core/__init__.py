from .pipeline import DetectedObject, OpenVocabPipeline, Segmentation  # noqa: F401
from .trainer import StepRecord, Trainer, build_localizer, load_localizer  # noqa: F401
from .evaluator import EvaluationResult, Evaluator  # noqa: F401
from .predictor import predict_sample, write_prediction  # noqa: F401
from .experiments import (  # noqa: F401
    SUITES,
    AblationSpec,
    ExperimentRow,
    ExperimentRunner,
    all_flag_sets,
    learning_violations,
    trend_violations,
)
