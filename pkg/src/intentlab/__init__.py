"""Workbench for open intent recognition: detect utterances outside the
known label set, then group them into candidate new intents.

The public surface is re-exported here; the submodules stay importable for
anything narrower (featurize, detect, discover, keywords, analysis,
pipeline, service).
"""

from .analysis import (MetricsReport, accuracy_known, compute_metrics_report,
                       confidence_histogram, confusion_views,
                       load_report_table, nmi, project_2d, sweep_curves)
from .corpus import (FORMATS, OPEN_LABEL, SPLITS, Dataset, SamplingPlan,
                     Utterance, dataset_stats, load_dataset,
                     make_sampling_plan)
from .detect import (DETECT_METHODS, DetectionResult, DetectorModel,
                     detect_predict, fit_detector, load_detector,
                     save_detector)
from .discover import (DISCOVER_METHODS, LINKAGES, PLACEHOLDER_METHODS,
                       ClusterAssignment, ClusterModel, agglomerative,
                       deep_aligned_train, estimate_k, fit_discovery,
                       hungarian, kmeans, load_clusters, save_clusters,
                       semi_seeded_kmeans)
from .featurize import (FEATURIZER_KINDS, FeatureMatrix, TrainConfig,
                        make_featurizer, matrix_from_array)
from .keywords import KeywordRecommendation, recommend_keywords
from .pipeline import (CONFIG_SCHEMA, TASKS, ExperimentConfig,
                       PipelineCancelled, TrainedPipeline, evaluate_pipeline,
                       load_pipeline, predict_pipeline, train_pipeline,
                       validate_config)
from .records import RUN_STATES, RunRecord

__version__ = "0.1.0"

__all__ = [
    "CONFIG_SCHEMA", "DETECT_METHODS", "DISCOVER_METHODS", "FEATURIZER_KINDS",
    "FORMATS", "LINKAGES", "OPEN_LABEL", "PLACEHOLDER_METHODS", "RUN_STATES",
    "SPLITS", "TASKS",
    "ClusterAssignment", "ClusterModel", "Dataset", "DetectionResult",
    "DetectorModel", "ExperimentConfig", "FeatureMatrix",
    "KeywordRecommendation", "MetricsReport", "PipelineCancelled",
    "RunRecord", "SamplingPlan", "TrainConfig", "TrainedPipeline",
    "Utterance",
    "accuracy_known", "agglomerative", "compute_metrics_report",
    "confidence_histogram", "confusion_views", "dataset_stats",
    "deep_aligned_train", "detect_predict", "estimate_k", "evaluate_pipeline",
    "fit_detector", "fit_discovery", "hungarian", "kmeans", "load_clusters",
    "load_dataset", "load_detector", "load_pipeline", "load_report_table",
    "make_featurizer", "make_sampling_plan", "matrix_from_array", "nmi",
    "predict_pipeline", "project_2d", "recommend_keywords", "save_clusters",
    "save_detector", "semi_seeded_kmeans", "sweep_curves", "train_pipeline",
    "validate_config",
]
