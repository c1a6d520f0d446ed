"""Independence testing from PU data via label permutation.

The observed statistic is the PU mutual information estimate. Its null
distribution comes from re-randomising the labeling: positives and
unlabeled points are pooled, and each round re-partitions the pooled rows
uniformly into a pseudo-positive set and a pseudo-unlabeled set of the
original sizes, then recomputes the estimate. Under independence the
original split is itself such a uniform partition, so the observed
statistic is exchangeable with the permuted ones and the test holds its
level. The p-value uses the add-one rank convention,
``(1 + #{permuted >= observed}) / (B + 1)``, which never reaches zero.

Exchangeability requires every statistic (observed included) to be the
same function of its split. In the default fast mode the basis centres
and the (sigma, lambda) pair are therefore frozen from a calibration
partition drawn before any statistic is computed; selecting them on the
observed split itself would bias its rank upward. With the basis frozen,
the pooled basis matrix is evaluated once and each round costs a single
ridge solve. ``recv_per_round=True`` instead re-runs the full
cross-validation inside every round and for the observed split
(adaptive and still symmetric, vastly slower); results record which
variant produced them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .basis import eval_basis
from .data import ClassPrior, GaussianMixtureSpec, PuDataset, sample_gaussian_pu
from .estimator import (
    EstimatorConfig,
    _RidgeSolver,
    estimate_smi,
    smi_from_j,
)

__all__ = [
    "PermTestResult",
    "permutation_test",
    "p_value_from_ranks",
    "type2_experiment",
    "TYPE2_COLUMNS",
]

TYPE2_COLUMNS = ("n_p", "n_u", "level", "trials", "type2_freq")


@dataclass(frozen=True)
class PermTestResult:
    """Observed statistic, its permutation null sample, and the p-value."""

    observed: float
    permuted: tuple[float, ...]
    p_value: float
    b_count: int
    prior_used: ClassPrior
    frozen_hyperparams: bool = True

    def __post_init__(self) -> None:
        if len(self.permuted) != self.b_count:
            raise ValueError(
                f"permuted sample has {len(self.permuted)} entries, expected {self.b_count}"
            )


def p_value_from_ranks(observed: float, permuted) -> float:
    """Add-one permutation p-value; always in [1/(B+1), 1]."""
    permuted = np.asarray(permuted, dtype=float)
    return (1 + int(np.sum(permuted >= observed))) / (permuted.size + 1)


def permutation_test(
    data: PuDataset,
    prior: ClassPrior,
    b_count: int = 1000,
    config: EstimatorConfig | None = None,
    seed=0,
    recv_per_round: bool = False,
) -> PermTestResult:
    """Test independence of inputs and labels from a PU sample.

    Small p-values mean the positives are distributed unlike the unlabeled
    pool, i.e. the label carries information about the input.

    :param b_count: number of permutation rounds, at least 19 (the
        resolution needed to ever reject at the 5% level).
    :param recv_per_round: re-run model selection inside every round and
        for the observed split, instead of fitting everything with
        hyperparameters frozen from a calibration partition.
    """
    if b_count < 19:
        raise ValueError(f"b_count must be at least 19, got {b_count}")
    if data.n_p < 1 or data.n_u < 1:
        raise ValueError("the test needs at least one positive and one unlabeled sample")
    cfg = config or EstimatorConfig()
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    observed_ss, calib_ss, rounds_ss = root.spawn(3)
    round_seeds = rounds_ss.spawn(b_count)

    pool = np.vstack([data.positives, data.unlabeled])
    n_p, n_total = data.n_p, data.n_p + data.n_u
    permuted: list[float] = []
    if recv_per_round:
        est, _, _ = estimate_smi(data, prior, replace(cfg, seed=observed_ss))
        observed = est.value
        for round_ss in round_seeds:
            split_ss, fit_ss = round_ss.spawn(2)
            order = np.random.default_rng(split_ss).permutation(n_total)
            pseudo = PuDataset(pool[order[:n_p]], pool[order[n_p:]])
            round_est, _, _ = estimate_smi(pseudo, prior, replace(cfg, seed=fit_ss))
            permuted.append(round_est.value)
    else:
        # Centres and (sigma, lambda) come from a throwaway calibration
        # partition, never from the observed split itself: selecting them
        # on the observed data would inflate its rank among the rounds.
        split_ss, fit_ss = calib_ss.spawn(2)
        order = np.random.default_rng(split_ss).permutation(n_total)
        calib = PuDataset(pool[order[:n_p]], pool[order[n_p:]])
        _, model, report = estimate_smi(calib, prior, replace(cfg, seed=fit_ss))

        phi = eval_basis(model.basis, pool)
        gram_pool = phi.T @ phi

        def frozen_stat(p_rows, u_rows):
            phi_p = phi[p_rows]
            H = (gram_pool - phi_p.T @ phi_p) / data.n_u
            beta = _RidgeSolver(H, report.chosen_lambda).solve(phi_p.mean(axis=0))
            j = 0.5 * float(np.mean((phi[u_rows] @ beta) ** 2)) - float(np.mean(phi_p @ beta))
            return smi_from_j(j, prior).value

        observed = frozen_stat(np.arange(n_p), np.arange(n_p, n_total))
        for round_ss in round_seeds:
            order = np.random.default_rng(round_ss).permutation(n_total)
            permuted.append(frozen_stat(order[:n_p], order[n_p:]))

    return PermTestResult(
        observed=observed,
        permuted=tuple(permuted),
        p_value=p_value_from_ranks(observed, permuted),
        b_count=b_count,
        prior_used=prior,
        frozen_hyperparams=not recv_per_round,
    )


def type2_experiment(
    spec: GaussianMixtureSpec,
    n_p_grid,
    n_u_grid,
    level: float,
    trials: int,
    seed=0,
    b_count: int = 200,
    config: EstimatorConfig | None = None,
) -> list[tuple[int, int, float, int, float]]:
    """Type-II error frequency of the test across sample-size grids.

    For every ``(n_p, n_u)`` pair, draws ``trials`` dependent datasets
    from ``spec`` and records the fraction whose p-value exceeds
    ``level`` (a missed detection). Rows follow :data:`TYPE2_COLUMNS`.
    """
    n_p_grid = [int(n) for n in n_p_grid]
    n_u_grid = [int(n) for n in n_u_grid]
    if not n_p_grid or not n_u_grid:
        raise ValueError("n_p_grid and n_u_grid must be non-empty")
    if not 0.0 < level <= 1.0:
        raise ValueError(f"level must be in (0, 1], got {level}")
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")

    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rows = []
    for i, n_p in enumerate(n_p_grid):
        for j, n_u in enumerate(n_u_grid):
            misses = 0
            for t in range(trials):
                cell_ss = np.random.SeedSequence(
                    entropy=root.entropy, spawn_key=(i, j, t)
                )
                data_ss, test_ss = cell_ss.spawn(2)
                data = sample_gaussian_pu(spec, n_p, n_u, data_ss)
                result = permutation_test(
                    data, spec.prior, b_count, config, seed=test_ss
                )
                if result.p_value > level:
                    misses += 1
            rows.append((n_p, n_u, level, trials, misses / trials))
    return rows
