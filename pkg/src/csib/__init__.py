"""Cauchy-Schwarz divergence information bottleneck toolkit."""

from .attacks import AttackConfig, evaluate_robustness, fgsm, pgd
from .conditional import PredictionBatch, conditional_cs, conditional_mmd, mse
from .data import Dataset, gen_synthetic, load_csv, minmax_normalize, split
from .dependence import (
    conditional_cs_qmi,
    cs_qmi,
    embedding_norms,
    hsic_biased,
    nib_kde_bound,
    normalized_cs_qmi,
)
from .divergences import (
    DiscreteDist,
    GaussianParams,
    cosine_divergence,
    discrete_cs,
    discrete_kl,
    empirical_cs,
    empirical_cs_embedding_form,
    empirical_mmd_sq,
    gaussian_cs,
    gaussian_kl,
)
from .kernels import KernelSpec, gram, pairwise_sqdist
from .nn import (
    Layer,
    ModelGraph,
    OptimizerState,
    forward,
    init_model,
    load_checkpoint,
    predict,
    save_checkpoint,
    step,
)
from .training import (
    InfoPlanePoint,
    TrainConfig,
    compression_ratio,
    cs_ib_loss,
    iyt_proxy,
    sweep,
    train,
)

__version__ = "0.1.0"
