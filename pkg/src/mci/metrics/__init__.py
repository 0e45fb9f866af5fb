from .caption import (
    MetricReport,
    bleu,
    cider_d,
    evaluate_captions,
    meteor_lite,
    rouge_l,
    stem,
)
from .segmentation import ConfusionMatrix, miou

__all__ = [
    "ConfusionMatrix",
    "miou",
    "bleu",
    "rouge_l",
    "cider_d",
    "meteor_lite",
    "stem",
    "evaluate_captions",
    "MetricReport",
]
