"""Frozen sparse transport operators and their algebraic checks.

Freezing a warp turns its optimized logits into two nonnegative
row-stochastic sparse matrices on the pixel lattice: an aggregation
factor whose rows mix candidate pixels and an interpolation factor whose
rows mix stencil neighbors.  Their product is a single sparse stochastic
operator that applies the identical spatial mixing to every channel, so
RGB fitting and spectral transfer share one transport.

Duplicate columns merge at freeze time, rows renormalize exactly, and
weights are stored in float64.  Operators are immutable once built;
application is row-parallel with per-band independence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import HyperCube, clamp_unit
from .retrieval import CandidateSet
from .warp import WarpParams, soft_weights, stencil_indices

ROW_SUM_TOL = 1e-9
APPLY_TOL = 1e-6
HULL_TOL = 1e-9
KAPPA_TOL = 1e-8
KAPPA_MAX_ITER = 10000

WARP_MAGIC = b"SWRP"


class WarpContainerError(ValueError):
    """Malformed operator container file."""


class KappaConvergenceError(RuntimeError):
    """Power iteration failed to reach the residual tolerance."""


@dataclass(frozen=True)
class SparseWarp:
    """Immutable nonnegative row-stochastic operator on a pixel lattice.

    matrix is square CSR with sorted, deduplicated columns.  k_limit and
    stencil record the construction bounds: every row has support at most
    k_limit * stencil * stencil.
    """

    matrix: sp.csr_matrix
    k_limit: int
    stencil: int

    def __post_init__(self) -> None:
        matrix = sp.csr_matrix(self.matrix, dtype=np.float64, copy=True)
        if matrix.shape[0] != matrix.shape[1]:
            msg = f"operator must be square, got shape {matrix.shape}"
            raise ValueError(msg)
        if self.k_limit < 1 or self.stencil < 1:
            raise ValueError("support bounds must be positive")
        matrix.sum_duplicates()
        # Stored zeros (softmax underflow) would inflate support counts.
        matrix.eliminate_zeros()
        matrix.sort_indices()
        if matrix.nnz and not np.all(np.isfinite(matrix.data)):
            raise ValueError("operator weights must be finite")
        object.__setattr__(self, "matrix", matrix)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def support_bound(self) -> int:
        return self.k_limit * self.stencil * self.stencil

    def row_supports(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).reshape(-1)

    def apply(self, field: np.ndarray) -> np.ndarray:
        """Transport a field with one row per pixel; channels independent."""
        values = np.asarray(field, dtype=np.float64)
        squeeze = values.ndim == 1
        if squeeze:
            values = values[:, None]
        if values.shape[0] != self.n:
            msg = f"field has {values.shape[0]} rows, operator expects {self.n}"
            raise ValueError(msg)
        out = self.matrix @ values
        return out[:, 0] if squeeze else out


@dataclass(frozen=True)
class OperatorReport:
    """Outcome of the operator property checks.

    failures lists human-readable violations naming the offending rows;
    passed is True when every check held.
    """

    nonnegative: bool
    max_row_sum_error: float
    max_row_support: int
    support_bound: int
    hull_violations: int
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "nonnegative": self.nonnegative,
            "max_row_sum_error": self.max_row_sum_error,
            "max_row_support": self.max_row_support,
            "support_bound": self.support_bound,
            "hull_violations": self.hull_violations,
            "failures": list(self.failures),
            "passed": self.passed,
        }


def _row_normalized_csr(
    rows: np.ndarray,
    cols: np.ndarray,
    weights: np.ndarray,
    n: int,
) -> sp.csr_matrix:
    matrix = sp.coo_matrix((weights, (rows, cols)), shape=(n, n)).tocsr()
    matrix.sum_duplicates()
    matrix.sort_indices()
    sums = np.asarray(matrix.sum(axis=1)).reshape(-1)
    if np.any(sums <= 0):
        raise ValueError("every row must carry positive total weight")
    scale = sp.diags(1.0 / sums)
    matrix = (scale @ matrix).tocsr()
    matrix.sort_indices()
    return matrix


def freeze(params: WarpParams, candidates: CandidateSet) -> tuple[SparseWarp, SparseWarp]:
    """Fix the optimized weights into sparse aggregation and interpolation
    factors.

    Aggregation rows accumulate the softmax candidate weights, merging
    duplicate candidate columns.  Interpolation rows accumulate stencil
    weights at clamped neighbor columns.  Both factors renormalize rows
    exactly after merging.
    """
    n = candidates.height * candidates.width
    if params.pixels != n:
        msg = f"params cover {params.pixels} pixels, lattice holds {n}"
        raise ValueError(msg)
    agg_weights = soft_weights(params.agg_logits, params.temperature)
    rows = np.repeat(np.arange(n, dtype=np.int64), candidates.keep)
    factor_a = _row_normalized_csr(
        rows,
        candidates.linear().reshape(-1),
        agg_weights.reshape(-1),
        n,
    )
    interp_weights = soft_weights(params.interp_logits)
    neighbor_cols = stencil_indices(candidates.height, candidates.width, params.stencil)
    rows_b = np.repeat(np.arange(n, dtype=np.int64), params.stencil**2)
    factor_b = _row_normalized_csr(
        rows_b,
        neighbor_cols.reshape(-1),
        interp_weights.reshape(-1),
        n,
    )
    return (
        SparseWarp(matrix=factor_a, k_limit=candidates.keep, stencil=1),
        SparseWarp(matrix=factor_b, k_limit=1, stencil=params.stencil),
    )


def transfer(
    factor_a: SparseWarp,
    factor_b: SparseWarp,
    cube: HyperCube,
) -> HyperCube:
    """Transport every band of a cube through aggregation then
    interpolation.

    All bands share the identical weights.  Output values clamp to [0, 1]
    with the count recorded on the cube; convexity means in-range input
    produces a zero count.
    """
    n = cube.pixels
    if factor_a.n != n or factor_b.n != n:
        msg = f"cube has {n} pixels, operators expect {factor_a.n} and {factor_b.n}"
        raise ValueError(msg)
    aggregated = factor_a.apply(cube.pixel_matrix())
    interpolated = factor_b.apply(aggregated)
    clipped, count = clamp_unit(interpolated)
    out = HyperCube.from_pixel_matrix(
        clipped,
        cube.height,
        cube.width,
        cube.wavelengths_nm,
    )
    return HyperCube(data=out.data, wavelengths_nm=out.wavelengths_nm, clamped=count)


def compose(factor_a: SparseWarp, factor_b: SparseWarp) -> SparseWarp:
    """Single composite operator: interpolation applied after aggregation.

    The product merges duplicate columns; applying it to any field matches
    the two-step application within float round-off.
    """
    if factor_a.n != factor_b.n:
        msg = f"factor sizes differ: {factor_a.n} vs {factor_b.n}"
        raise ValueError(msg)
    product = (factor_b.matrix @ factor_a.matrix).tocsr()
    return SparseWarp(
        matrix=product,
        k_limit=factor_a.k_limit * factor_b.k_limit,
        stencil=max(factor_a.stencil, factor_b.stencil),
    )


def verify_operator(
    warp: SparseWarp,
    probe_bands: int = 4,
    seed: int = 0,
) -> OperatorReport:
    """Check nonnegativity, row sums, support bounds and convex-hull
    containment on a random probe.

    The probe check transports a random in-range multichannel field and
    asserts each output value lies within the [min, max] of the values on
    its row's support.
    """
    matrix = warp.matrix
    failures = []
    negative_rows = np.unique(
        np.repeat(np.arange(warp.n), np.diff(matrix.indptr))[matrix.data < 0]
    )
    if negative_rows.size:
        failures.append(f"negative weights in rows {negative_rows[:8].tolist()}")
    sums = warp.row_sums()
    sum_errors = np.abs(sums - 1.0)
    bad_sum_rows = np.nonzero(sum_errors > ROW_SUM_TOL)[0]
    if bad_sum_rows.size:
        failures.append(f"row sums off by > {ROW_SUM_TOL} in rows {bad_sum_rows[:8].tolist()}")
    supports = warp.row_supports()
    bad_support_rows = np.nonzero(supports > warp.support_bound)[0]
    if bad_support_rows.size:
        failures.append(
            f"row support exceeds {warp.support_bound} in rows {bad_support_rows[:8].tolist()}"
        )
    empty_rows = np.nonzero(supports == 0)[0]
    if empty_rows.size:
        failures.append(f"empty rows {empty_rows[:8].tolist()}")
    rng = np.random.default_rng(seed)
    probe = rng.random((warp.n, probe_bands))
    out = matrix @ probe
    hull_violations = 0
    bad_hull_rows = []
    indptr, indices = matrix.indptr, matrix.indices
    for row in range(warp.n):
        support = indices[indptr[row] : indptr[row + 1]]
        if support.size == 0:
            continue
        values = probe[support]
        low = values.min(axis=0) - HULL_TOL
        high = values.max(axis=0) + HULL_TOL
        bad = np.count_nonzero((out[row] < low) | (out[row] > high))
        if bad:
            hull_violations += bad
            bad_hull_rows.append(row)
    if bad_hull_rows:
        failures.append(f"probe left the support hull in rows {bad_hull_rows[:8]}")
    return OperatorReport(
        nonnegative=not negative_rows.size,
        max_row_sum_error=float(sum_errors.max(initial=0.0)),
        max_row_support=int(supports.max(initial=0)),
        support_bound=warp.support_bound,
        hull_violations=hull_violations,
        failures=tuple(failures),
    )


def overlap_kappa(
    warp: SparseWarp,
    tol: float = KAPPA_TOL,
    max_iter: int = KAPPA_MAX_ITER,
) -> float:
    """Largest eigenvalue of (transpose T) T by power iteration.

    Bounds the Frobenius gain of the operator on any error field.  Always
    at least 1 for row-stochastic operators since the all-ones vector maps
    to itself.  Raises KappaConvergenceError when the residual never drops
    below tol * max(1, eigenvalue).
    """
    matrix = warp.matrix
    rng = np.random.default_rng(0)
    vec = rng.standard_normal(warp.n)
    vec /= np.linalg.norm(vec)
    eigenvalue = 0.0
    for _ in range(max_iter):
        forward = matrix @ vec
        back = matrix.T @ forward
        eigenvalue = float(vec @ back)
        residual = float(np.linalg.norm(back - eigenvalue * vec))
        if residual <= tol * max(1.0, abs(eigenvalue)):
            return eigenvalue
        norm = np.linalg.norm(back)
        if norm == 0:
            return 0.0
        vec = back / norm
    msg = f"power iteration residual {residual:.3e} above tolerance after {max_iter} iterations"
    raise KappaConvergenceError(msg)


# ---------------------------------------------------------------------------
# Binary operator container
# ---------------------------------------------------------------------------


def save_warp(warp: SparseWarp, path: str) -> None:
    """Write an operator to the binary container.

    Layout, all little-endian: 4 magic bytes, u32 lattice size, u32
    aggregation bound, u32 stencil side, u32 per-row entry counts, u32
    column indices, f64 weights.
    """
    matrix = warp.matrix
    counts = np.diff(matrix.indptr).astype("<u4")
    with open(path, "wb") as fh:
        fh.write(WARP_MAGIC)
        fh.write(np.asarray([warp.n, warp.k_limit, warp.stencil], dtype="<u4").tobytes())
        fh.write(counts.tobytes())
        fh.write(matrix.indices.astype("<u4").tobytes())
        fh.write(matrix.data.astype("<f8").tobytes())


def load_warp(path: str) -> SparseWarp:
    """Read an operator container written by save_warp."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise WarpContainerError("file too short to hold the header")
    if blob[:4] != WARP_MAGIC:
        msg = f"bad magic {blob[:4]!r}, expected {WARP_MAGIC!r}"
        raise WarpContainerError(msg)
    n, k_limit, stencil = (int(v) for v in np.frombuffer(blob[4:16], dtype="<u4"))
    if n < 1 or k_limit < 1 or stencil < 1:
        raise WarpContainerError("header declares non-positive sizes")
    counts_end = 16 + 4 * n
    if len(blob) < counts_end:
        raise WarpContainerError("row count table is truncated")
    counts = np.frombuffer(blob[16:counts_end], dtype="<u4").astype(np.int64)
    nnz = int(counts.sum())
    expected = counts_end + 4 * nnz + 8 * nnz
    if len(blob) != expected:
        msg = f"file holds {len(blob)} bytes, header declares {expected}"
        raise WarpContainerError(msg)
    cols_end = counts_end + 4 * nnz
    indices = np.frombuffer(blob[counts_end:cols_end], dtype="<u4").astype(np.int32)
    weights = np.frombuffer(blob[cols_end:], dtype="<f8")
    if nnz and int(indices.max()) >= n:
        raise WarpContainerError("column index outside the lattice")
    if not np.all(np.isfinite(weights)):
        raise WarpContainerError("weights contain NaN or infinite entries")
    indptr = np.concatenate([[0], np.cumsum(counts)])
    matrix = sp.csr_matrix((weights.copy(), indices, indptr), shape=(n, n))
    return SparseWarp(matrix=matrix, k_limit=k_limit, stencil=stencil)
