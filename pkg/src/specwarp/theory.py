"""Numerical verification of the distribution-level transport claims.

Training pairs are treated as atoms (input, label) of small discrete
distributions under the metric ||dx||_F + ||dy||_F.  The exact
1-Wasserstein distance between two such distributions is a linear
program solved to optimality, which makes the coverage and perturbation
inequalities machine-checkable: each checker computes both sides with
exact transport and reports the signed slack (nonnegative means the
inequality holds).

The improvement-condition evaluator is plain arithmetic on user-supplied
constants; nothing here estimates learning-theoretic quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .transport import SparseWarp, overlap_kappa

SUPPORT_CAP = 64
WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class PairAtom:
    """One (input, label) sample; both parts are finite matrices."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        y = np.atleast_2d(np.asarray(self.y, dtype=np.float64))
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("pair atoms must be finite")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class DiscreteDist:
    """Finitely supported distribution over pair atoms.

    weights are nonnegative and sum to 1 within 1e-12.  Atom parts must
    share dimensions across the support.
    """

    atoms: tuple[PairAtom, ...]
    weights: np.ndarray

    def __post_init__(self) -> None:
        atoms = tuple(self.atoms)
        if not atoms:
            raise ValueError("distributions need at least one atom")
        x_shape, y_shape = atoms[0].x.shape, atoms[0].y.shape
        for atom in atoms[1:]:
            if atom.x.shape != x_shape or atom.y.shape != y_shape:
                raise ValueError("atom dimensions must match across the support")
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if weights.shape[0] != len(atoms):
            msg = f"{len(atoms)} atoms but {weights.shape[0]} weights"
            raise ValueError(msg)
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(float(weights.sum()) - 1.0) > WEIGHT_TOL:
            msg = f"weights sum to {weights.sum()!r}, expected 1 within {WEIGHT_TOL}"
            raise ValueError(msg)
        weights = weights.copy()
        weights.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, atoms: Sequence[PairAtom]) -> "DiscreteDist":
        atoms = tuple(atoms)
        if not atoms:
            raise ValueError("distributions need at least one atom")
        return cls(atoms=atoms, weights=np.full(len(atoms), 1.0 / len(atoms)))

    @classmethod
    def from_samples(cls, xs: Sequence[np.ndarray], ys: Sequence[np.ndarray]) -> "DiscreteDist":
        if len(xs) != len(ys):
            msg = f"{len(xs)} inputs but {len(ys)} labels"
            raise ValueError(msg)
        return cls.uniform([PairAtom(x=x, y=y) for x, y in zip(xs, ys)])


def mixture(parts: Sequence[DiscreteDist], coefficients: Sequence[float]) -> DiscreteDist:
    """Convex mixture of distributions by concatenating scaled supports.

    Components with zero coefficient are dropped.
    """
    if len(parts) != len(coefficients) or not parts:
        raise ValueError("need matching, non-empty parts and coefficients")
    coeff = np.asarray(coefficients, dtype=np.float64)
    if np.any(coeff < 0) or abs(float(coeff.sum()) - 1.0) > WEIGHT_TOL:
        raise ValueError("mixture coefficients must be nonnegative and sum to 1")
    atoms: list[PairAtom] = []
    weights: list[float] = []
    for part, c in zip(parts, coeff):
        if c == 0.0:
            continue
        atoms.extend(part.atoms)
        weights.extend(c * part.weights)
    return DiscreteDist(atoms=tuple(atoms), weights=np.asarray(weights))


def pair_distance(a: PairAtom, b: PairAtom) -> float:
    """Sum of Frobenius distances of the input and label parts."""
    if a.x.shape != b.x.shape or a.y.shape != b.y.shape:
        msg = (
            f"atom dimensions differ: x {a.x.shape} vs {b.x.shape}, "
            f"y {a.y.shape} vs {b.y.shape}"
        )
        raise ValueError(msg)
    return float(np.linalg.norm(a.x - b.x) + np.linalg.norm(a.y - b.y))


def _cost_matrix(p: DiscreteDist, q: DiscreteDist) -> np.ndarray:
    cost = np.empty((len(p.atoms), len(q.atoms)), dtype=np.float64)
    for i, atom_p in enumerate(p.atoms):
        for j, atom_q in enumerate(q.atoms):
            cost[i, j] = pair_distance(atom_p, atom_q)
    return cost


def wasserstein1(p: DiscreteDist, q: DiscreteDist) -> float:
    """Exact 1-Wasserstein distance between small discrete distributions.

    Solves the transport linear program to optimality (simplex), so
    inequality checks see the true value rather than an entropic
    approximation.  Supports are capped at 64 atoms each.
    """
    m, n = len(p.atoms), len(q.atoms)
    if m > SUPPORT_CAP or n > SUPPORT_CAP:
        msg = f"supports {m} and {n} exceed the {SUPPORT_CAP}-atom cap"
        raise ValueError(msg)
    cost = _cost_matrix(p, q)
    # Marginal constraints; the final column constraint is redundant given
    # the row constraints and equal total mass, so it is dropped.
    rows = []
    targets = []
    for i in range(m):
        indicator = np.zeros(m * n)
        indicator[i * n : (i + 1) * n] = 1.0
        rows.append(indicator)
        targets.append(p.weights[i])
    for j in range(n - 1):
        indicator = np.zeros(m * n)
        indicator[j::n] = 1.0
        rows.append(indicator)
        targets.append(q.weights[j])
    result = linprog(
        cost.reshape(-1),
        A_eq=np.asarray(rows),
        b_eq=np.asarray(targets),
        bounds=(0.0, None),
        method="highs",
    )
    if not result.success:
        raise RuntimeError(f"transport LP failed: {result.message}")
    return float(result.fun)


@dataclass(frozen=True)
class BoundReport:
    """Measured quantities and signed slack of one inequality check.

    slack = bound - measured; nonnegative slack means the inequality
    held.  Fields that a given lemma does not use stay None.
    """

    lemma: str
    measured: float
    bound: float
    slack: float
    alpha: float | None = None
    delta_p: float | None = None
    delta_w: float | None = None
    e_w: float | None = None
    delta_alpha: float | None = None
    eps_p: float | None = None
    eps_g: float | None = None
    eps_alpha: float | None = None
    kappa: float | None = None
    lipschitz: float | None = None

    def to_json(self) -> dict:
        payload = {
            "lemma": self.lemma,
            "measured": self.measured,
            "bound": self.bound,
            "slack": self.slack,
        }
        optional = {
            "alpha": self.alpha,
            "delta_p": self.delta_p,
            "delta_w": self.delta_w,
            "e_w": self.e_w,
            "delta_alpha": self.delta_alpha,
            "eps_p": self.eps_p,
            "eps_g": self.eps_g,
            "eps_alpha": self.eps_alpha,
            "kappa": self.kappa,
            "lipschitz": self.lipschitz,
        }
        payload.update({k: v for k, v in optional.items() if v is not None})
        return payload


def check_mixture_coverage(
    target: DiscreteDist,
    proxy_clean: DiscreteDist,
    generated_clean: DiscreteDist,
    vicinal: DiscreteDist,
    alphas: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
) -> list[BoundReport]:
    """Check the mixture-coverage inequality on an alpha grid.

    For each mixing weight alpha, the distance from the target to the
    (1-alpha, alpha) mixture of clean proxy and clean generated pairs must
    not exceed (1-alpha) * delta_p + alpha * (delta_w + e_w), where
    delta_p, delta_w are target distances to the proxy and vicinal
    distributions and e_w is the generated-to-vicinal mismatch.
    """
    delta_p = wasserstein1(target, proxy_clean)
    delta_w = wasserstein1(target, vicinal)
    e_w = wasserstein1(generated_clean, vicinal)
    reports = []
    for alpha in alphas:
        if not 0 <= alpha <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        mixed = mixture([proxy_clean, generated_clean], [1.0 - alpha, alpha])
        measured = wasserstein1(target, mixed)
        bound = (1.0 - alpha) * delta_p + alpha * delta_w + alpha * e_w
        reports.append(
            BoundReport(
                lemma="mixture_coverage",
                measured=measured,
                bound=bound,
                slack=bound - measured,
                alpha=float(alpha),
                delta_p=delta_p,
                delta_w=delta_w,
                e_w=e_w,
                delta_alpha=bound,
            )
        )
    return reports


@dataclass(frozen=True)
class LinearDegradation:
    """Linear degradation operator with a known Lipschitz constant."""

    fn: Callable[[np.ndarray], np.ndarray]
    lipschitz: float

    @classmethod
    def identity(cls) -> "LinearDegradation":
        return cls(fn=lambda arr: arr, lipschitz=1.0)

    @classmethod
    def scaling(cls, factor: float) -> "LinearDegradation":
        return cls(fn=lambda arr: factor * arr, lipschitz=abs(factor))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "LinearDegradation":
        mat = np.asarray(matrix, dtype=np.float64)
        norm = float(np.linalg.norm(mat, ord=2))
        return cls(fn=lambda arr: mat @ arr, lipschitz=norm)


def check_pair_perturbation(
    clean_samples: Sequence[np.ndarray],
    error_samples: Sequence[np.ndarray],
    degradation: LinearDegradation,
    warp: SparseWarp,
    kappa: float | None = None,
) -> list[BoundReport]:
    """Check both pair-perturbation inequalities on empirical samples.

    Builds the actual and clean empirical pair distributions on the proxy
    side (raw samples) and the generated side (warped samples), measures
    their exact transport distances, and compares against the closed-form
    bounds: (1 + L) * mean_i ||E_i||_F on the proxy side and
    (1 + L) * sqrt(kappa * mean_i ||E_i||_F^2) on the generated side.
    """
    if len(clean_samples) != len(error_samples):
        msg = f"{len(clean_samples)} clean samples but {len(error_samples)} errors"
        raise ValueError(msg)
    if not clean_samples:
        raise ValueError("need at least one sample")
    clean = [np.asarray(y, dtype=np.float64) for y in clean_samples]
    errors = [np.asarray(e, dtype=np.float64) for e in error_samples]
    for y, e in zip(clean, errors):
        if y.shape != e.shape:
            msg = f"sample shape {y.shape} does not match error shape {e.shape}"
            raise ValueError(msg)
    actual = [y + e for y, e in zip(clean, errors)]
    lip = degradation.lipschitz

    proxy_clean = DiscreteDist.from_samples([degradation.fn(y) for y in clean], clean)
    proxy_actual = DiscreteDist.from_samples([degradation.fn(y) for y in actual], actual)
    eps_p = wasserstein1(proxy_actual, proxy_clean)
    error_norms = np.asarray([np.linalg.norm(e) for e in errors])
    bound_p = (1.0 + lip) * float(error_norms.mean())

    warped_clean = [warp.apply(y) for y in clean]
    warped_actual = [warp.apply(y) for y in actual]
    gen_clean = DiscreteDist.from_samples([degradation.fn(y) for y in warped_clean], warped_clean)
    gen_actual = DiscreteDist.from_samples([degradation.fn(y) for y in warped_actual], warped_actual)
    eps_g = wasserstein1(gen_actual, gen_clean)
    if kappa is None:
        kappa = overlap_kappa(warp)
    bound_g = (1.0 + lip) * math.sqrt(kappa * float(np.mean(error_norms**2)))

    shared = {"kappa": float(kappa), "lipschitz": lip, "eps_p": eps_p, "eps_g": eps_g}
    return [
        BoundReport(
            lemma="pair_perturbation_proxy",
            measured=eps_p,
            bound=bound_p,
            slack=bound_p - eps_p,
            **shared,
        ),
        BoundReport(
            lemma="pair_perturbation_generated",
            measured=eps_g,
            bound=bound_g,
            slack=bound_g - eps_g,
            **shared,
        ),
    ]


def mixture_perturbation(eps_p: float, eps_g: float, alpha: float) -> float:
    """Perturbation of the alpha mixture: (1-alpha) eps_p + alpha eps_g."""
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return (1.0 - alpha) * eps_p + alpha * eps_g


def improvement_condition(
    report: BoundReport | None = None,
    *,
    lipschitz: float,
    delta_s: float,
    source_complexity: float,
    mix_complexity: float,
    alpha: float | None = None,
    warp_bias_sq: float = 0.0,
    delta_alpha: float | None = None,
    eps_alpha: float | None = None,
) -> float:
    """Signed margin of the sufficient improvement condition.

    margin = L * (delta_s - delta_alpha) + (source_complexity -
    mix_complexity) - alpha * warp_bias_sq - 2 * L * eps_alpha.  A
    positive margin means training on the mixture carries the tighter
    bound.  delta_alpha, eps_alpha and alpha fall back to the fields of
    the supplied report; all remaining constants are user-supplied.
    """
    if report is not None:
        if delta_alpha is None:
            delta_alpha = report.delta_alpha
        if eps_alpha is None:
            eps_alpha = report.eps_alpha
        if alpha is None:
            alpha = report.alpha
    if delta_alpha is None or alpha is None:
        raise ValueError("delta_alpha and alpha are required (directly or via report)")
    if eps_alpha is None:
        eps_alpha = 0.0
    return (
        lipschitz * (delta_s - delta_alpha)
        + (source_complexity - mix_complexity)
        - alpha * warp_bias_sq
        - 2.0 * lipschitz * eps_alpha
    )
