from .banana import BananaModel, banana_metric, banana_rejection_sample
from .corruption import CorruptionSpec, corrupt_metric_grads
from .funnel import FunnelModel, funnel_analytic_sample, softabs_metric
from .gaussian import ConstantMetricGaussian, EuclideanView, standard_normal_model
from .logistic import LogisticModel, load_heart_dataset, logistic_metric, synthetic_heart_dataset
from .studentt import StudentTModel, studentt_analytic_sample, studentt_metric

__all__ = [
    "BananaModel",
    "ConstantMetricGaussian",
    "CorruptionSpec",
    "EuclideanView",
    "FunnelModel",
    "LogisticModel",
    "StudentTModel",
    "banana_metric",
    "banana_rejection_sample",
    "corrupt_metric_grads",
    "funnel_analytic_sample",
    "load_heart_dataset",
    "logistic_metric",
    "softabs_metric",
    "standard_normal_model",
    "studentt_analytic_sample",
    "studentt_metric",
    "synthetic_heart_dataset",
]
