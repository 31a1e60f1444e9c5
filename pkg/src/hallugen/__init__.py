"""hallugen: synthesize hallucinated QA benchmarks and evaluate detectors."""

from .models import (
    CandidateAnswer,
    DetectionVerdict,
    Difficulty,
    EntailmentResult,
    HallucinationCategory,
    HallucinationRecord,
    MetricsReport,
    QAItem,
    QualityVerdict,
    SamplingParams,
    VerdictLabel,
    grade_difficulty,
)
from .pipeline import PipelineConfig, ProviderSet, run_corpus, run_pipeline
from .providers import ClientRegistry, PairChoice, ProviderConfig, load_roster

__version__ = "0.1.0"

__all__ = [
    "CandidateAnswer",
    "ClientRegistry",
    "DetectionVerdict",
    "Difficulty",
    "EntailmentResult",
    "HallucinationCategory",
    "HallucinationRecord",
    "MetricsReport",
    "PairChoice",
    "PipelineConfig",
    "ProviderConfig",
    "ProviderSet",
    "QAItem",
    "QualityVerdict",
    "SamplingParams",
    "VerdictLabel",
    "grade_difficulty",
    "load_roster",
    "run_corpus",
    "run_pipeline",
    "__version__",
]
