"""Soft warp parameterization and its alignment-loss optimization.

A warp is parameterized per guide pixel by aggregation logits over the
retrieved candidates and interpolation logits over a square stencil of
lattice offsets.  Softmax turns both into convex weights: aggregation
gathers reference values at candidate coordinates, interpolation then
mixes the gathered field over each pixel's clamped stencil neighborhood.

The logits are fit by adaptive-moment gradient descent on a weighted sum
of seven image-alignment terms (pixel and patch L1, mutual information,
SSIM, gradient L1, coordinate smoothness and a candidate-distance prior).
Gradients come from reverse-mode differentiation of the exact forward
computation; their correctness contract is the central finite-difference
check in the test suite.

Evaluation is vectorized over pixels; the optimizer step is a serial
barrier between evaluations.  Parameters are exclusively owned while
optimize runs, and the loop is deterministic and seed-free.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .core import RgbImage
from .retrieval import CandidateSet

# Guard added to the mean candidate distance before normalization.
DIST_NORM_EPS = 1e-8
# Differentiable |x| uses sqrt(x^2 + SMOOTH_ABS_EPS^2); reports use true L1.
SMOOTH_ABS_EPS = 1e-8
MI_BINS = 32
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
PATCH_SIDE = 5

TERM_NAMES = ("l1", "patch", "mi", "ssim", "grad", "smooth", "dist")


class OptimizationError(RuntimeError):
    """Raised when the loss becomes non-finite during optimization."""


@dataclass(frozen=True)
class WarpLossWeights:
    """Nonnegative coefficients of the seven alignment-loss terms."""

    l1: float = 1.0
    patch: float = 1.0
    mi: float = 0.1
    ssim: float = 0.5
    grad: float = 0.5
    smooth: float = 0.1
    dist: float = 0.1

    def __post_init__(self) -> None:
        for name in TERM_NAMES:
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                msg = f"loss weight {name} must be finite and nonnegative, got {value}"
                raise ValueError(msg)

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in TERM_NAMES)


@dataclass(frozen=True)
class OptimConfig:
    """Adaptive-moment descent settings for the warp logits."""

    iterations: int = 200
    step: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ValueError(f"iterations must be nonnegative, got {self.iterations}")
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("moment decays must lie in [0, 1)")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")


@dataclass(frozen=True)
class WarpParams:
    """Aggregation and interpolation logits of one warp.

    agg_logits has shape (pixels, candidates); interp_logits has shape
    (pixels, stencil * stencil).  temperature divides the aggregation
    logits inside the softmax; the interpolation softmax is untempered.
    """

    agg_logits: np.ndarray
    interp_logits: np.ndarray
    stencil: int = 7
    temperature: float = 1.0

    def __post_init__(self) -> None:
        agg = np.ascontiguousarray(np.asarray(self.agg_logits, dtype=np.float64))
        itp = np.ascontiguousarray(np.asarray(self.interp_logits, dtype=np.float64))
        if self.stencil < 1 or self.stencil % 2 == 0:
            msg = f"stencil side must be odd and positive, got {self.stencil}"
            raise ValueError(msg)
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if agg.ndim != 2 or itp.ndim != 2:
            raise ValueError("logit arrays must be 2-d (pixels, choices)")
        if itp.shape[0] != agg.shape[0]:
            msg = f"pixel counts differ: {agg.shape[0]} vs {itp.shape[0]}"
            raise ValueError(msg)
        if itp.shape[1] != self.stencil * self.stencil:
            msg = (
                f"interp logits have {itp.shape[1]} columns, "
                f"stencil {self.stencil} needs {self.stencil * self.stencil}"
            )
            raise ValueError(msg)
        if not (np.all(np.isfinite(agg)) and np.all(np.isfinite(itp))):
            raise ValueError("logits must be finite")
        agg.flags.writeable = False
        itp.flags.writeable = False
        object.__setattr__(self, "agg_logits", agg)
        object.__setattr__(self, "interp_logits", itp)

    @property
    def pixels(self) -> int:
        return self.agg_logits.shape[0]

    @property
    def candidates(self) -> int:
        return self.agg_logits.shape[1]


@dataclass(frozen=True)
class CoordinateField:
    """Expected reference coordinate per pixel and derived fields.

    coords is the weighted candidate coordinate c(u); displacement is
    c(u) - u; normalized divides rows by height and columns by width.
    """

    height: int
    width: int
    coords: np.ndarray
    displacement: np.ndarray
    normalized: np.ndarray


@dataclass(frozen=True)
class WarpLossResult:
    """Loss evaluation: reported total, per-term breakdown and the
    differentiable objective.

    terms maps term name to its weighted contribution using true absolute
    values; total is their sum.  objective is the smoothed-L1 variant that
    gradients and the optimizer use.
    """

    total: float
    objective: float
    terms: dict[str, float]


@dataclass(frozen=True)
class LossTrace:
    """Per-iteration loss values; rows are (iteration, total, 7 terms)."""

    rows: tuple[tuple[float, ...], ...] = field(default_factory=tuple)

    HEADER = ("iteration", "total") + TERM_NAMES

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.HEADER)
            for row in self.rows:
                writer.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])

    def __len__(self) -> int:
        return len(self.rows)


# ---------------------------------------------------------------------------
# Weight and field operations (numpy)
# ---------------------------------------------------------------------------


def soft_weights(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Row-wise softmax of logits / temperature, stabilized by the row max.

    Output rows are nonnegative and sum to 1 within float round-off.
    """
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    scaled = np.asarray(logits, dtype=np.float64) / temperature
    if not np.all(np.isfinite(scaled)):
        raise ValueError("logits must be finite")
    shifted = scaled - scaled.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def normalized_distances(candidates: CandidateSet) -> np.ndarray:
    """Candidate distances divided by their global mean plus a guard.

    All-zero distances map to exactly zero.
    """
    dists = candidates.distances
    return dists / (dists.mean() + DIST_NORM_EPS)


def pre_interp(weights: np.ndarray, source: np.ndarray, candidates: CandidateSet) -> np.ndarray:
    """Candidate-weighted gather: out[u] = sum_k weights[u,k] * source[v_uk].

    source holds one row per reference pixel and any number of channels,
    so RGB and full spectra transport identically.
    """
    w = np.asarray(weights, dtype=np.float64)
    src = np.asarray(source, dtype=np.float64)
    if w.shape != (candidates.pixels, candidates.keep):
        msg = f"weights shape {w.shape} does not match candidates {(candidates.pixels, candidates.keep)}"
        raise ValueError(msg)
    squeeze = src.ndim == 1
    if squeeze:
        src = src[:, None]
    if src.shape[0] != candidates.height * candidates.width:
        msg = f"source has {src.shape[0]} rows, lattice holds {candidates.height * candidates.width}"
        raise ValueError(msg)
    gathered = src[candidates.linear()]
    out = np.einsum("nk,nkc->nc", w, gathered)
    return out[:, 0] if squeeze else out


def stencil_offsets(stencil: int) -> np.ndarray:
    """Integer offsets of an s x s stencil, row-major, shape (s*s, 2)."""
    if stencil < 1 or stencil % 2 == 0:
        raise ValueError(f"stencil side must be odd and positive, got {stencil}")
    radius = stencil // 2
    span = np.arange(-radius, radius + 1)
    off_y, off_x = np.meshgrid(span, span, indexing="ij")
    return np.stack([off_y.reshape(-1), off_x.reshape(-1)], axis=1)


def stencil_indices(height: int, width: int, stencil: int) -> np.ndarray:
    """Clamped linear index of every stencil neighbor, shape (n, s*s).

    Out-of-bound offsets clamp to the nearest lattice coordinate, so
    border pixels revisit in-bounds neighbors.
    """
    offsets = stencil_offsets(stencil)
    ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    ny = np.clip(ys.reshape(-1)[:, None] + offsets[:, 0][None, :], 0, height - 1)
    nx = np.clip(xs.reshape(-1)[:, None] + offsets[:, 1][None, :], 0, width - 1)
    return ny * width + nx


def interp_apply(
    interp_logits: np.ndarray,
    field_values: np.ndarray,
    height: int,
    width: int,
) -> np.ndarray:
    """Stencil-softmax smoothing of a lattice field.

    out[u] = sum_eta b[u, eta] * field[clamp(u + eta)] with b the row
    softmax of the interpolation logits.  field_values holds one row per
    lattice pixel.
    """
    logits = np.asarray(interp_logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[0] != height * width:
        msg = f"expected logits of shape ({height * width}, s*s), got {logits.shape}"
        raise ValueError(msg)
    stencil = math.isqrt(logits.shape[1])
    if stencil * stencil != logits.shape[1] or stencil % 2 == 0:
        msg = f"logit columns {logits.shape[1]} are not an odd square stencil"
        raise ValueError(msg)
    values = np.asarray(field_values, dtype=np.float64)
    squeeze = values.ndim == 1
    if squeeze:
        values = values[:, None]
    if values.shape[0] != height * width:
        msg = f"field has {values.shape[0]} rows, lattice holds {height * width}"
        raise ValueError(msg)
    b = soft_weights(logits)
    neighbors = stencil_indices(height, width, stencil)
    out = np.einsum("ns,nsc->nc", b, values[neighbors])
    return out[:, 0] if squeeze else out


def coordinate_field(weights: np.ndarray, candidates: CandidateSet) -> CoordinateField:
    """Expected candidate coordinate, displacement and normalized field."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (candidates.pixels, candidates.keep):
        msg = f"weights shape {w.shape} does not match candidates {(candidates.pixels, candidates.keep)}"
        raise ValueError(msg)
    cand_yx = candidates.coords.astype(np.float64)
    expected = np.einsum("nk,nkc->nc", w, cand_yx)
    height, width = candidates.height, candidates.width
    ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    lattice = np.stack([ys.reshape(-1), xs.reshape(-1)], axis=1).astype(np.float64)
    displacement = expected - lattice
    normalized = expected / np.array([height, width], dtype=np.float64)
    return CoordinateField(
        height=height,
        width=width,
        coords=expected,
        displacement=displacement,
        normalized=normalized,
    )


def init_params(
    candidates: CandidateSet,
    stencil: int = 7,
    temperature: float = 1.0,
    center_logit: float = 10.0,
) -> WarpParams:
    """Distance-informed starting logits.

    Aggregation logits start at minus the mean-normalized candidate
    distance, so nearer candidates begin heavier.  Interpolation logits
    bias the center offset by center_logit over a zero background; the
    default is large enough that the kernel starts as a near-identity
    stamp (center weight 0.998 on a 7x7 stencil), which descent can
    still soften where the alignment needs it.
    """
    agg = -normalized_distances(candidates)
    interp = np.zeros((candidates.pixels, stencil * stencil), dtype=np.float64)
    interp[:, (stencil * stencil) // 2] = center_logit
    return WarpParams(
        agg_logits=agg,
        interp_logits=interp,
        stencil=stencil,
        temperature=temperature,
    )


# ---------------------------------------------------------------------------
# Loss graph (torch, float64)
# ---------------------------------------------------------------------------


@dataclass
class _Scene:
    """Constant tensors shared by every loss evaluation of one problem."""

    height: int
    width: int
    cand_lin: torch.Tensor
    cand_yx: torch.Tensor
    dist_norm: torch.Tensor
    stencil_idx: torch.Tensor
    proxy_vals: torch.Tensor
    guide_img: torch.Tensor
    guide_flat: torch.Tensor
    lattice: torch.Tensor


def _build_scene(
    candidates: CandidateSet,
    proxy_rgb: RgbImage,
    guide_rgb: RgbImage,
    stencil: int,
) -> _Scene:
    if (proxy_rgb.height, proxy_rgb.width) != (candidates.height, candidates.width):
        msg = (
            f"reference image is {proxy_rgb.height}x{proxy_rgb.width}, "
            f"candidates expect {candidates.height}x{candidates.width}"
        )
        raise ValueError(msg)
    if (guide_rgb.height, guide_rgb.width) != (candidates.height, candidates.width):
        msg = (
            f"guide image is {guide_rgb.height}x{guide_rgb.width}, "
            f"candidates expect {candidates.height}x{candidates.width}"
        )
        raise ValueError(msg)
    height, width = candidates.height, candidates.width
    ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    lattice = np.stack([ys.reshape(-1), xs.reshape(-1)], axis=1).astype(np.float64)
    return _Scene(
        height=height,
        width=width,
        cand_lin=torch.from_numpy(candidates.linear()),
        cand_yx=torch.from_numpy(candidates.coords.astype(np.float64)),
        dist_norm=torch.from_numpy(normalized_distances(candidates)),
        stencil_idx=torch.from_numpy(stencil_indices(height, width, stencil)),
        proxy_vals=torch.from_numpy(proxy_rgb.pixel_matrix()),
        guide_img=torch.from_numpy(guide_rgb.data.astype(np.float64)),
        guide_flat=torch.from_numpy(guide_rgb.pixel_matrix()),
        lattice=torch.from_numpy(lattice),
    )


def _smooth_abs(x: torch.Tensor) -> torch.Tensor:
    return torch.sqrt(x * x + SMOOTH_ABS_EPS * SMOOTH_ABS_EPS)


def _forward_diffs(img: torch.Tensor) -> torch.Tensor:
    """Forward differences of channel planes with zero last row/column."""
    channels, height, width = img.shape
    dy = img.new_zeros(img.shape)
    dx = img.new_zeros(img.shape)
    if height > 1:
        dy[:, :-1, :] = img[:, 1:, :] - img[:, :-1, :]
    if width > 1:
        dx[:, :, :-1] = img[:, :, 1:] - img[:, :, :-1]
    return torch.cat([dy, dx], dim=0)


def _gaussian_kernel(side: int, sigma: float, dtype=torch.float64) -> torch.Tensor:
    half = (side - 1) / 2.0
    coords = torch.arange(side, dtype=dtype) - half
    one_d = torch.exp(-(coords * coords) / (2.0 * sigma * sigma))
    kernel = one_d[:, None] * one_d[None, :]
    return kernel / kernel.sum()


def _ssim_window(height: int, width: int) -> int:
    side = min(SSIM_WINDOW, height, width)
    return side if side % 2 == 1 else side - 1


def _ssim_mean(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean structural similarity over channels, valid-window convolution."""
    channels, height, width = a.shape
    side = _ssim_window(height, width)
    kernel = _gaussian_kernel(side, SSIM_SIGMA, dtype=a.dtype)
    weight = kernel.expand(channels, 1, side, side)
    x = a.unsqueeze(0)
    y = b.unsqueeze(0)
    mu_x = F.conv2d(x, weight, groups=channels)
    mu_y = F.conv2d(y, weight, groups=channels)
    xx = F.conv2d(x * x, weight, groups=channels)
    yy = F.conv2d(y * y, weight, groups=channels)
    xy = F.conv2d(x * y, weight, groups=channels)
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return (num / den).mean()


def _soft_histogram(lum: torch.Tensor) -> torch.Tensor:
    """Per-pixel bin weights of a Gaussian-kernel histogram on [0, 1]."""
    centers = (torch.arange(MI_BINS, dtype=lum.dtype) + 0.5) / MI_BINS
    bandwidth = 1.0 / MI_BINS
    z = (lum[:, None] - centers[None, :]) / bandwidth
    kernel = torch.exp(-0.5 * z * z)
    return kernel / kernel.sum(dim=1, keepdim=True)


_LOG_FLOOR = 1e-300


def _mi_loss(lum_a: torch.Tensor, lum_b: torch.Tensor) -> torch.Tensor:
    """Mutual-information alignment cost log(bins) - MI.

    MI of the soft joint histogram never exceeds the log(bins) marginal
    entropy cap, so the shifted cost stays nonnegative while keeping the
    gradient of plain negated MI.
    """
    wa = _soft_histogram(lum_a)
    wb = _soft_histogram(lum_b)
    joint = wa.t() @ wb / lum_a.shape[0]
    marg_a = joint.sum(dim=1, keepdim=True)
    marg_b = joint.sum(dim=0, keepdim=True)
    log_joint = torch.log(torch.clamp(joint, min=_LOG_FLOOR))
    log_outer = torch.log(torch.clamp(marg_a * marg_b, min=_LOG_FLOOR))
    mi = (joint * (log_joint - log_outer)).sum()
    return math.log(MI_BINS) - mi


def _loss_pieces(
    agg_logits: torch.Tensor,
    interp_logits: torch.Tensor,
    scene: _Scene,
    temperature: float,
) -> tuple[dict[str, torch.Tensor], dict[str, torch.Tensor]]:
    """Smoothed (differentiable) and true-L1 values of the seven terms.

    Both dicts hold unweighted term values; MI and SSIM terms are shared
    between the two since they need no absolute value.
    """
    height, width = scene.height, scene.width
    a = torch.softmax(agg_logits / temperature, dim=1)
    rbar = (a.unsqueeze(-1) * scene.proxy_vals[scene.cand_lin]).sum(dim=1)
    b = torch.softmax(interp_logits, dim=1)
    rtil = (b.unsqueeze(-1) * rbar[scene.stencil_idx]).sum(dim=1)
    rtil_img = rtil.t().reshape(3, height, width)

    resid = rtil - scene.guide_flat
    smooth = {"l1": _smooth_abs(resid).mean()}
    true = {"l1": resid.abs().mean()}

    radius = PATCH_SIDE // 2
    stacked = torch.cat([rtil_img.unsqueeze(0), scene.guide_img.unsqueeze(0)], dim=0)
    padded = F.pad(stacked, (radius, radius, radius, radius), mode="replicate")
    patches = F.unfold(padded, PATCH_SIDE)
    patch_resid = patches[0] - patches[1]
    smooth["patch"] = _smooth_abs(patch_resid).mean()
    true["patch"] = patch_resid.abs().mean()

    mi_term = _mi_loss(rtil.mean(dim=1), scene.guide_flat.mean(dim=1))
    smooth["mi"] = mi_term
    true["mi"] = mi_term

    ssim_term = 1.0 - _ssim_mean(rtil_img, scene.guide_img)
    smooth["ssim"] = ssim_term
    true["ssim"] = ssim_term

    grad_resid = _forward_diffs(rtil_img) - _forward_diffs(scene.guide_img)
    smooth["grad"] = _smooth_abs(grad_resid).mean()
    true["grad"] = grad_resid.abs().mean()

    coords = (a.unsqueeze(-1) * scene.cand_yx).sum(dim=1)
    size = coords.new_tensor([float(height), float(width)])
    chat_img = (coords / size).t().reshape(2, height, width)
    chat_diffs = _forward_diffs(chat_img)
    smooth["smooth"] = _smooth_abs(chat_diffs).mean()
    true["smooth"] = chat_diffs.abs().mean()

    dist_term = (a * scene.dist_norm).sum(dim=1).mean()
    smooth["dist"] = dist_term
    true["dist"] = dist_term
    return smooth, true


def _combine(
    pieces: dict[str, torch.Tensor],
    weights: WarpLossWeights,
) -> torch.Tensor:
    total = None
    for name in TERM_NAMES:
        contribution = getattr(weights, name) * pieces[name]
        total = contribution if total is None else total + contribution
    return total


def warp_loss(
    params: WarpParams,
    candidates: CandidateSet,
    proxy_rgb: RgbImage,
    guide_rgb: RgbImage,
    weights: WarpLossWeights = WarpLossWeights(),
) -> WarpLossResult:
    """Evaluate the alignment loss and its per-term breakdown.

    terms holds weighted true-L1 contributions and total their sum;
    objective is the smoothed variant the optimizer descends.
    """
    scene = _build_scene(candidates, proxy_rgb, guide_rgb, params.stencil)
    agg = torch.from_numpy(np.array(params.agg_logits))
    interp = torch.from_numpy(np.array(params.interp_logits))
    with torch.no_grad():
        smooth, true = _loss_pieces(agg, interp, scene, params.temperature)
        objective = _combine(smooth, weights)
    terms = {name: float(getattr(weights, name) * true[name]) for name in TERM_NAMES}
    return WarpLossResult(
        total=float(sum(terms.values())),
        objective=float(objective),
        terms=terms,
    )


def warp_loss_grad(
    params: WarpParams,
    candidates: CandidateSet,
    proxy_rgb: RgbImage,
    guide_rgb: RgbImage,
    weights: WarpLossWeights = WarpLossWeights(),
) -> tuple[float, np.ndarray, np.ndarray]:
    """Smoothed objective value and its gradients for both logit blocks."""
    scene = _build_scene(candidates, proxy_rgb, guide_rgb, params.stencil)
    agg = torch.from_numpy(np.array(params.agg_logits)).requires_grad_(True)
    interp = torch.from_numpy(np.array(params.interp_logits)).requires_grad_(True)
    smooth, _ = _loss_pieces(agg, interp, scene, params.temperature)
    objective = _combine(smooth, weights)
    objective.backward()
    return (
        float(objective.detach()),
        agg.grad.detach().numpy().copy(),
        interp.grad.detach().numpy().copy(),
    )


def optimize(
    params: WarpParams,
    candidates: CandidateSet,
    proxy_rgb: RgbImage,
    guide_rgb: RgbImage,
    weights: WarpLossWeights = WarpLossWeights(),
    config: OptimConfig = OptimConfig(),
) -> tuple[WarpParams, LossTrace]:
    """Descend the alignment loss on both logit blocks.

    Runs the configured number of adaptive-moment steps and records the
    reported loss before each step.  Deterministic given its inputs; a
    non-finite loss raises OptimizationError naming the iteration.
    """
    scene = _build_scene(candidates, proxy_rgb, guide_rgb, params.stencil)
    agg = torch.from_numpy(np.array(params.agg_logits)).requires_grad_(True)
    interp = torch.from_numpy(np.array(params.interp_logits)).requires_grad_(True)
    optimizer = torch.optim.Adam(
        [agg, interp],
        lr=config.step,
        betas=(config.beta1, config.beta2),
        eps=config.eps,
    )
    rows = []
    for iteration in range(config.iterations):
        optimizer.zero_grad()
        smooth, true = _loss_pieces(agg, interp, scene, params.temperature)
        objective = _combine(smooth, weights)
        if not torch.isfinite(objective):
            msg = f"non-finite loss at iteration {iteration}"
            raise OptimizationError(msg)
        with torch.no_grad():
            weighted = [float(getattr(weights, name) * true[name]) for name in TERM_NAMES]
            rows.append((float(iteration), float(sum(weighted)), *weighted))
        objective.backward()
        optimizer.step()
    final = WarpParams(
        agg_logits=agg.detach().numpy().copy(),
        interp_logits=interp.detach().numpy().copy(),
        stencil=params.stencil,
        temperature=params.temperature,
    )
    return final, LossTrace(rows=tuple(rows))
