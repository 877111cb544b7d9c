"""Hyperspectral data synthesis via retrieval-based sparse stochastic
warping.

The package synthesizes guide-aligned hyperspectral cubes from a proxy
cube and RGB guide images: patch descriptors drive candidate retrieval,
soft warp logits are optimized against an RGB alignment loss, the frozen
weights become one sparse row-stochastic transport operator, and that
operator transfers the full spectra.  Degradation models, aligned pair
export, fidelity metrics and numerical checks of the transport
inequalities round out the pipeline.
"""

from __future__ import annotations

from .config import GuideConfig, PipelineConfig
from .core import (
    HyperCube,
    PixelCoord,
    RgbImage,
    load_cube,
    load_rgb,
    project_rgb,
    save_cube,
    save_rgb,
)
from .degrade import (
    DegradationSpec,
    PairRecord,
    PairSet,
    affine_rotation_about_center,
    affine_translation,
    apply_degradation,
    build_pairs,
    make_synthetic_guide,
    resize_bicubic,
)
from .descriptors import DescriptorConfig, DescriptorField, build_descriptors
from .metrics import MetricReport, evaluate, psnr, sam, ssim
from .pipeline import SynthesisResult, synthesize
from .retrieval import CandidateSet, RetrievalConfig, expand_and_refine, knn_exact, retrieve
from .theory import (
    BoundReport,
    DiscreteDist,
    LinearDegradation,
    PairAtom,
    check_mixture_coverage,
    check_pair_perturbation,
    improvement_condition,
    pair_distance,
    wasserstein1,
)
from .transport import (
    KappaConvergenceError,
    OperatorReport,
    SparseWarp,
    WarpContainerError,
    compose,
    freeze,
    load_warp,
    overlap_kappa,
    save_warp,
    transfer,
    verify_operator,
)
from .warp import (
    CoordinateField,
    LossTrace,
    OptimConfig,
    WarpLossResult,
    WarpLossWeights,
    WarpParams,
    coordinate_field,
    init_params,
    interp_apply,
    optimize,
    pre_interp,
    soft_weights,
    warp_loss,
    warp_loss_grad,
)

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "CandidateSet",
    "CoordinateField",
    "DegradationSpec",
    "DescriptorConfig",
    "DescriptorField",
    "DiscreteDist",
    "GuideConfig",
    "HyperCube",
    "KappaConvergenceError",
    "LinearDegradation",
    "LossTrace",
    "MetricReport",
    "OperatorReport",
    "OptimConfig",
    "PairAtom",
    "PairRecord",
    "PairSet",
    "PipelineConfig",
    "PixelCoord",
    "RetrievalConfig",
    "RgbImage",
    "SparseWarp",
    "SynthesisResult",
    "WarpContainerError",
    "WarpLossResult",
    "WarpLossWeights",
    "WarpParams",
    "affine_rotation_about_center",
    "affine_translation",
    "apply_degradation",
    "build_descriptors",
    "build_pairs",
    "check_mixture_coverage",
    "check_pair_perturbation",
    "compose",
    "coordinate_field",
    "evaluate",
    "expand_and_refine",
    "freeze",
    "improvement_condition",
    "init_params",
    "interp_apply",
    "knn_exact",
    "load_cube",
    "load_rgb",
    "load_warp",
    "make_synthetic_guide",
    "optimize",
    "overlap_kappa",
    "pair_distance",
    "pre_interp",
    "project_rgb",
    "psnr",
    "resize_bicubic",
    "retrieve",
    "sam",
    "save_cube",
    "save_rgb",
    "save_warp",
    "soft_weights",
    "ssim",
    "synthesize",
    "transfer",
    "verify_operator",
    "warp_loss",
    "warp_loss_grad",
    "wasserstein1",
]
