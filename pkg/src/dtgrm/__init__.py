"""Dilated temporal graph reasoning for frame-wise action segmentation."""

from .autodiff import Tensor, backward
from .backbone import Backbone, BackboneConfig
from .graph import DtgrmStage, DtgrmStageConfig, drgc_layer, refine
from .losses import LossWeights, cls_loss, tmse_loss, total_loss
from .metrics import MetricReport, edit_score, f1_at_k, frame_accuracy, segments_from_labels
from .model import ModelConfig, SegmentationModel
from .selfsup import ExchangeSpec, exchange_frames
from .synthetic import GeneratorConfig, LabeledSequence, generate_sequence, generate_split

__version__ = "0.1.0"
