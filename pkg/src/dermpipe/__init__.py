"""dermpipe: a spreadsheet-driven experiment pipeline for skin-lesion style
image classification.

One CSV row describes one training run (dataset, split, segmentation,
augmentation preset, classifier mnemonic, image geometry, class weights);
the runner executes every row on CPU and writes a metrics report plus
loss/ROC artifacts per row.
"""
from .imaging import ColorSpace, RasterImage, ResizeFilter, convert_colorspace, hflip, resize, rotate
from .exp_config import (
    ComputedWeights,
    ExperimentRow,
    ExplicitWeights,
    PreSplit,
    RowError,
    SampleN,
    parse_class_weights,
    parse_experiment_file,
    parse_split,
)
from .dataset import DataSplit, DatasetIndex, class_proportions, compute_class_weights, load_dataset_index, resolve_split
from .segment import BinaryMask, SegmentConfig, apply_mask, detect_anomalies, extend_mask, jaccard_index, pixel_sens_spec
from .augment import (
    NO_SHUFFLE,
    AugmentChain,
    DiskImageProvider,
    ImageProvider,
    ListImageProvider,
    epoch_order,
    make_preset,
    prefetch_stream,
    register_preset,
)
from .metrics import ConfusionMatrix, RocCurve, confusion_at_threshold, roc_auc, sens_spec_acc
from .trainer import (
    BackendUnavailable,
    BaselineClassifier,
    Classifier,
    EpochLog,
    Model,
    TrainConfig,
    UnknownMethod,
    build_classifier,
    predict_scores,
    register_adapter,
    train,
)
from .runner import RunConfig, TrainReport, make_synthetic_dataset, run_experiments, write_train_output

__version__ = "0.1.0"
