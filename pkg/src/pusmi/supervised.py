"""Fully supervised mutual information estimation and exact ground truth.

Two oracles used to judge the PU-data estimator:

* a supervised estimator fitted on labeled data, modelling the joint
  density ratio ``p(x, y) / (p(x) p(y))`` with one coefficient vector per
  class over a shared Gaussian basis, and

* exact mutual information for two-Gaussian synthetic specs by adaptive
  quadrature.

For the quadrature, both class conditionals share a diagonal covariance,
so the density ratio depends on the input only through the scalar
log-likelihood ratio ``t(x) = a . x + c``. Under either class ``t`` is
Gaussian, which turns the d-dimensional integrals into one-dimensional
ones. The dependence measure is integrated twice, once per class ratio and
once from the positive ratio alone; the two routes must agree and that
agreement is enforced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad

from .basis import GaussianBasis, eval_basis, median_bandwidth, select_centers
from .data import GaussianMixtureSpec, LabeledDataset
from .errors import IllConditionedError, QuadratureError
from .estimator import EstimatorConfig, FitReport, _RidgeSolver, _streams

__all__ = [
    "JointRatioModel",
    "fit_pn",
    "j_hat_pn",
    "smi_hat_pn",
    "estimate_smi_pn",
    "true_smi_quadrature",
]


@dataclass(frozen=True)
class JointRatioModel:
    """Class-sliced model of the joint ratio ``p(x,y) / (p(x) p(y))``.

    The slice for class y is ``alpha_y . phi(x)`` over one shared basis.
    """

    basis: GaussianBasis
    alpha_pos: np.ndarray
    alpha_neg: np.ndarray

    def __post_init__(self) -> None:
        ap = np.asarray(self.alpha_pos, dtype=float)
        an = np.asarray(self.alpha_neg, dtype=float)
        if ap.shape != (self.basis.size,) or an.shape != (self.basis.size,):
            raise ValueError(
                f"alpha_pos and alpha_neg must each have {self.basis.size} "
                f"coefficients, got shapes {ap.shape}, {an.shape}"
            )
        object.__setattr__(self, "alpha_pos", ap)
        object.__setattr__(self, "alpha_neg", an)

    def evaluate(self, points: np.ndarray, label: int) -> np.ndarray:
        """Model value for class ``label`` (+1 or -1) at each point."""
        alpha = self.alpha_pos if label == 1 else self.alpha_neg
        return eval_basis(self.basis, points) @ alpha


def _pn_blocks(data: LabeledDataset, basis: GaussianBasis):
    """Per-class quadratic and linear terms of the supervised objective.

    The quadratic term for class y is ``(n_y / n^2) * sum_i phi(x_i)
    phi(x_i)^T`` with the sum over all rows regardless of label; the linear
    term averages ``phi`` over the rows of class y, divided by n.
    """
    phi = eval_basis(basis, data.features)
    n = data.n
    gram = phi.T @ phi
    pos = data.labels == 1
    blocks = {}
    for label, mask in ((1, pos), (-1, ~pos)):
        n_y = int(mask.sum())
        blocks[label] = ((n_y / n**2) * gram, phi[mask].sum(axis=0) / n)
    return blocks


def fit_pn(data: LabeledDataset, basis: GaussianBasis, lam: float) -> JointRatioModel:
    """Ridge fit of the supervised joint-ratio model.

    The objective decouples across classes, so each slice solves its own
    regularised system.
    """
    if data.n < 1:
        raise ValueError("cannot fit on an empty dataset")
    counts = {1: int((data.labels == 1).sum()), -1: int((data.labels == -1).sum())}
    if counts[1] == 0 or counts[-1] == 0:
        raise ValueError(
            f"supervised fit needs both classes, got {counts[1]} positive and "
            f"{counts[-1]} negative samples"
        )
    blocks = _pn_blocks(data, basis)
    alphas = {}
    for label, (H, h) in blocks.items():
        alphas[label] = _RidgeSolver(H, lam).solve(h)
    return JointRatioModel(basis, alphas[1], alphas[-1])


def j_hat_pn(model: JointRatioModel, data: LabeledDataset) -> float:
    """Empirical supervised fitting objective (lower is better)."""
    if data.n < 1:
        raise ValueError("cannot score on an empty dataset")
    blocks = _pn_blocks(data, model.basis)
    total = 0.0
    for label, alpha in ((1, model.alpha_pos), (-1, model.alpha_neg)):
        H, h = blocks[label]
        total += 0.5 * float(alpha @ H @ alpha) - float(alpha @ h)
    return total


def smi_hat_pn(model: JointRatioModel, data: LabeledDataset) -> float:
    """Supervised mutual information estimate of ``model`` on ``data``."""
    return -j_hat_pn(model, data) - 0.5


def estimate_smi_pn(
    data: LabeledDataset, config: EstimatorConfig | None = None
) -> tuple[float, JointRatioModel, FitReport]:
    """Cross-validated supervised estimate on labeled data.

    Folds are stratified by class so every training split keeps both
    classes. Centres come from the full feature matrix.
    """
    cfg = config or EstimatorConfig()
    n_pos = int((data.labels == 1).sum())
    n_neg = int((data.labels == -1).sum())
    if n_pos < cfg.folds or n_neg < cfg.folds:
        raise ValueError(
            f"need at least {cfg.folds} samples per class for {cfg.folds}-fold "
            f"validation, got {n_pos} positive and {n_neg} negative"
        )
    streams = _streams(cfg.seed)
    if cfg.sigma_grid is None:
        med = median_bandwidth(data.features, streams["median"])
        cfg = replace(cfg, sigma_grid=(0.5 * med, med, 2.0 * med))

    centers = select_centers(data.features, cfg.b_max, streams["centers"])
    pos_idx = np.flatnonzero(data.labels == 1)
    neg_idx = np.flatnonzero(data.labels == -1)
    pos_folds = np.array_split(
        np.random.default_rng(streams["folds_p"]).permutation(pos_idx), cfg.folds
    )
    neg_folds = np.array_split(
        np.random.default_rng(streams["folds_u"]).permutation(neg_idx), cfg.folds
    )

    table: list[tuple[float, float, float]] = []
    for sigma in cfg.sigma_grid:
        basis = GaussianBasis(centers, sigma)
        scores = np.zeros(len(cfg.lambda_grid))
        for pf, nf in zip(pos_folds, neg_folds):
            hold = np.concatenate([pf, nf])
            mask = np.ones(data.n, dtype=bool)
            mask[hold] = False
            train = LabeledDataset(data.features[mask], data.labels[mask])
            held = LabeledDataset(data.features[hold], data.labels[hold])
            for k, lam in enumerate(cfg.lambda_grid):
                try:
                    model = fit_pn(train, basis, lam)
                except IllConditionedError:
                    scores[k] = np.inf
                    continue
                scores[k] += j_hat_pn(model, held)
        for k, lam in enumerate(cfg.lambda_grid):
            table.append((sigma, lam, scores[k] / cfg.folds))

    finite = [row for row in table if np.isfinite(row[2])]
    if not finite:
        raise IllConditionedError("every (sigma, lambda) candidate failed to fit")
    chosen_sigma, chosen_lambda, _ = min(finite, key=lambda row: (row[2], row[1], row[0]))
    model = fit_pn(data, GaussianBasis(centers, chosen_sigma), chosen_lambda)
    report = FitReport(
        chosen_sigma=chosen_sigma,
        chosen_lambda=chosen_lambda,
        cv_table=tuple(table),
        final_objective=j_hat_pn(model, data),
    )
    return smi_hat_pn(model, data), model, report


def _ratio_pos(t: float, theta_p: float, theta_n: float) -> float:
    """p(x|+1)/p(x) as a function of the log-likelihood ratio t."""
    if t >= 0:
        return 1.0 / (theta_p + theta_n * math.exp(-t))
    e = math.exp(t)
    return e / (theta_p * e + theta_n)


def _ratio_neg(t: float, theta_p: float, theta_n: float) -> float:
    """p(x|-1)/p(x) as a function of the log-likelihood ratio t."""
    if t <= 0:
        return 1.0 / (theta_p * math.exp(t) + theta_n)
    e = math.exp(-t)
    return e / (theta_p + theta_n * e)


def _gauss_expect(f, mean: float, sd: float, interesting: tuple[float, ...]) -> float:
    """Adaptive quadrature of ``E[f(T)]`` for ``T ~ N(mean, sd^2)``.

    The integration interval is +-12 standard deviations; ``f`` must be
    bounded so the truncated tails are negligible.
    """
    lo, hi = mean - 12.0 * sd, mean + 12.0 * sd
    breaks = sorted(p for p in interesting if lo < p < hi)
    norm = 1.0 / (sd * math.sqrt(2.0 * math.pi))

    def integrand(t: float) -> float:
        z = (t - mean) / sd
        return f(t) * norm * math.exp(-0.5 * z * z)

    value, abserr = quad(
        integrand, lo, hi, points=breaks or None, limit=200, epsabs=1e-13, epsrel=1e-11
    )
    if abserr > 1e-7 * max(1.0, abs(value)):
        raise QuadratureError(
            f"quadrature error estimate {abserr:.2e} too large for value {value:.6e}"
        )
    return value


def true_smi_quadrature(spec: GaussianMixtureSpec) -> float:
    """Exact mutual information of a two-Gaussian spec by quadrature.

    Computes the class-summed Pearson divergence and its
    positive-ratio-only equivalent and errors if they disagree beyond
    1e-6 relative (with a 1e-12 absolute floor). Returns the class-summed
    value. Identical class means give exactly 0.
    """
    theta_p = spec.prior.theta_p
    theta_n = spec.prior.theta_n
    diff = spec.mean_pos - spec.mean_neg
    if not np.any(diff):
        return 0.0

    a = diff / spec.cov_diag
    c = -0.5 * float(np.sum((spec.mean_pos**2 - spec.mean_neg**2) / spec.cov_diag))
    m_pos = float(a @ spec.mean_pos) + c
    m_neg = float(a @ spec.mean_neg) + c
    sd = math.sqrt(float(a @ (a * spec.cov_diag)))
    marks = (0.0, m_pos, m_neg)

    def marginal_expect(f) -> float:
        return theta_p * _gauss_expect(f, m_pos, sd, marks) + theta_n * _gauss_expect(
            f, m_neg, sd, marks
        )

    pearson_pos = marginal_expect(lambda t: (_ratio_pos(t, theta_p, theta_n) - 1.0) ** 2)
    pearson_neg = marginal_expect(lambda t: (_ratio_neg(t, theta_p, theta_n) - 1.0) ** 2)

    class_summed = 0.5 * theta_p * pearson_pos + 0.5 * theta_n * pearson_neg
    pos_only = theta_p / (2.0 * theta_n) * pearson_pos
    gap = abs(class_summed - pos_only)
    if gap > 1e-6 * max(abs(class_summed), abs(pos_only)) and gap > 1e-12:
        raise QuadratureError(
            f"dependence-measure identity violated: {class_summed!r} vs {pos_only!r}"
        )
    return class_summed
