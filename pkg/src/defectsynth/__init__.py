from defectsynth.data_model import (
    ImageBuf,
    MaskBuf,
    PairSample,
    Provenance,
    TrigParams,
    TrigBounds,
    LabelGenConfig,
    LabelRecord,
    WganConfig,
    RenderStyle,
    TranslatorConfig,
    SegConfig,
    ElasticParams,
    GridParams,
    AugmentPolicy,
    ManifestEntry,
    DatasetManifest,
    Confusion,
    MetricRow,
    ExperimentScale,
    ExperimentConfig,
)

from defectsynth.rng import SeededRng, derive_rng

from defectsynth.utils.binarize import binarize
from defectsynth.utils.image_io import read_image, write_image, read_mask, write_mask

from defectsynth.labelgen.base import BaseLabelGenerator, foreground_fraction
from defectsynth.labelgen.trig import TrigLabelGenerator, generate_label, eval_curve
from defectsynth.labelgen.wgan import (
    WganModel,
    WganLabelGenerator,
    train_wgan,
    sample_labels,
)

from defectsynth.nn.layers import Dense, Conv2d, TConv2d, LeakyReLU, ReLU, Sigmoid, Tanh
from defectsynth.nn.networks import Sequential, UNet
from defectsynth.nn.losses import loss_bce, loss_dice, loss_l1, seg_loss, wasserstein_gap
from defectsynth.nn.optim import RMSProp, Adam, clip_params
from defectsynth.nn.gradcheck import grad_check
from defectsynth.nn.checkpoint import save_checkpoint, load_checkpoint

from defectsynth.translate.base import BaseLabelTranslator
from defectsynth.translate.procedural import ProceduralRenderer, procedural_render
from defectsynth.translate.pix2pix import (
    TranslatorModel,
    Pix2PixTranslator,
    train_translator,
    translate,
)
from defectsynth.translate.ingest import ingest_external, write_pair, load_pairs

from defectsynth.augment.transforms import (
    flip_h,
    flip_v,
    rotate180,
    random_sized_crop,
    elastic_transform,
    grid_distortion,
)
from defectsynth.augment.policy import augment_online, augment_pairs

from defectsynth.segnet import SegModel, train_segmenter, predict, predict_many

from defectsynth.metrics import (
    confusion,
    compute_metrics,
    evaluate_set,
    report_table,
    metrics_frame,
)

from defectsynth.pipeline.manifest import resolve_manifest, read_manifest, write_manifest
from defectsynth.pipeline.dataset import gen_corpus, assemble_dataset, DatasetSources
from defectsynth.pipeline.stages import Stage, StageGraph
from defectsynth.pipeline.experiment import run_experiment, ExperimentReport

from defectsynth.plot_manager import PlotManager
from defectsynth.plots import add_training_log_to_plot, overlay_prediction
