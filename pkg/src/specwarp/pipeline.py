"""End-to-end synthesis for one (proxy cube, guide image) pair.

Wires the stages together: project the proxy to RGB, build descriptors
for both images, retrieve candidates, optimize the warp logits, freeze
them into sparse factors, compose the single transport operator, and
transfer the full spectra onto the guide layout.  The result carries
every intermediate product the caller might audit, including the
operator property report.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import GuideConfig, PipelineConfig
from .core import HyperCube, RgbImage, project_rgb
from .degrade import affine_rotation_about_center, affine_translation, make_synthetic_guide
from .descriptors import build_descriptors
from .retrieval import CandidateSet, retrieve
from .transport import OperatorReport, SparseWarp, compose, freeze, transfer, verify_operator
from .warp import (
    CoordinateField,
    LossTrace,
    WarpLossResult,
    WarpParams,
    coordinate_field,
    init_params,
    optimize,
    soft_weights,
    warp_loss,
)


@dataclass(frozen=True)
class SynthesisResult:
    """Everything produced while synthesizing one aligned cube."""

    cube: HyperCube
    factor_a: SparseWarp
    factor_b: SparseWarp
    composite: SparseWarp
    report: OperatorReport
    trace: LossTrace
    final_loss: WarpLossResult
    params: WarpParams
    candidates: CandidateSet
    coords: CoordinateField


def synthesize(
    proxy: HyperCube,
    guide: RgbImage,
    config: PipelineConfig,
    verify_seed: int = 0,
) -> SynthesisResult:
    """Synthesize a guide-aligned cube from a proxy cube.

    The guide must share the proxy's spatial dimensions.  Every stage is
    deterministic and seed-free; verify_seed only picks the random probe
    of the operator check.
    """
    if (guide.height, guide.width) != (proxy.height, proxy.width):
        msg = (
            f"guide is {guide.height}x{guide.width}, "
            f"proxy is {proxy.height}x{proxy.width}"
        )
        raise ValueError(msg)
    proxy_rgb = project_rgb(proxy)
    guide_desc = build_descriptors(guide, config.descriptor)
    proxy_desc = build_descriptors(proxy_rgb, config.descriptor)
    candidates = retrieve(guide_desc, proxy_desc, config.retrieval)
    params0 = init_params(candidates, stencil=config.stencil, temperature=config.temperature)
    params, trace = optimize(
        params0,
        candidates,
        proxy_rgb,
        guide,
        weights=config.loss,
        config=config.optim,
    )
    final_loss = warp_loss(params, candidates, proxy_rgb, guide, weights=config.loss)
    factor_a, factor_b = freeze(params, candidates)
    composite = compose(factor_a, factor_b)
    cube = transfer(factor_a, factor_b, proxy)
    report = verify_operator(composite, seed=verify_seed)
    coords = coordinate_field(soft_weights(params.agg_logits, params.temperature), candidates)
    return SynthesisResult(
        cube=cube,
        factor_a=factor_a,
        factor_b=factor_b,
        composite=composite,
        report=report,
        trace=trace,
        final_loss=final_loss,
        params=params,
        candidates=candidates,
        coords=coords,
    )


def draw_guide(
    proxy_rgb: RgbImage,
    guide_config: GuideConfig,
    seed: int,
) -> tuple[RgbImage, np.ndarray, dict]:
    """Draw one synthetic guide view from the configured bounds.

    Returns the guide, the exact correspondence map and the drawn affine
    parameters for the manifest.
    """
    rng = np.random.default_rng(seed)
    rotation = float(rng.uniform(-guide_config.rotation_deg, guide_config.rotation_deg))
    translate_y = float(rng.uniform(-guide_config.translate_px, guide_config.translate_px))
    translate_x = float(rng.uniform(-guide_config.translate_px, guide_config.translate_px))
    scale = float(1.0 + rng.uniform(-guide_config.scale_jitter, guide_config.scale_jitter))
    affine = affine_rotation_about_center(
        proxy_rgb.height,
        proxy_rgb.width,
        rotation,
        scale=scale,
    )
    affine = affine + np.array([[0.0, 0.0, translate_y], [0.0, 0.0, translate_x]])
    guide, correspondence = make_synthetic_guide(
        proxy_rgb,
        affine,
        gain_jitter=guide_config.gain_jitter,
        offset_jitter=guide_config.offset_jitter,
        seed=seed,
    )
    drawn = {
        "rotation_deg": rotation,
        "translate_y": translate_y,
        "translate_x": translate_x,
        "scale": scale,
        "seed": seed,
    }
    return guide, correspondence, drawn
