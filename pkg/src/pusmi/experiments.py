"""Seeded experiment drivers behind the command-line interface.

Two families: estimation-error sweeps that track the mean squared error of
the PU mutual-information estimate across sample sizes, and the
two-dimensional toy study where a linear map trained by alternating
minimisation recovers the class-separating axis while PCA locks onto the
high-variance axis.

Every driver derives one seed per trial from a root ``SeedSequence`` and a
structural key (grid position, trial index), so results are reproducible
and independent of execution order; trials may therefore run in parallel.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import (
    ClassPrior,
    GaussianMixtureSpec,
    LabeledDataset,
    PuDataset,
    make_pu,
    sample_gaussian_labeled,
    sample_gaussian_pu,
)
from .estimator import EstimatorConfig, estimate_smi
from .mlp import MlpSpec, SgdConfig
from .purl import PurlConfig, PurlResult, pca_project, train_purl, transform
from .supervised import estimate_smi_pn, true_smi_quadrature

__all__ = [
    "FIG1_COLUMNS",
    "keyed_seed",
    "fig1_sweep",
    "fig1_sweep_labeled",
    "toy_purl_config",
    "PurlToyResult",
    "purl_toy",
]

FIG1_COLUMNS = ("n", "mse_mean", "mse_stderr")


def keyed_seed(root: np.random.SeedSequence, *key: int) -> np.random.SeedSequence:
    """Seed for one cell of an experiment, stable under reordering.

    Built from the root entropy and a structural spawn key, so cell (i, t)
    gets the same stream no matter how many other cells run, or in what
    order.
    """
    return np.random.SeedSequence(
        entropy=root.entropy, spawn_key=tuple(int(k) for k in key)
    )


def _as_root(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _run_trials(trial_fn, trials: int, threads: int) -> np.ndarray:
    out = np.empty(trials)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for t, err in enumerate(pool.map(trial_fn, range(trials))):
                out[t] = err
    else:
        for t in range(trials):
            out[t] = trial_fn(t)
    return out


def _sweep_axis(vary: str, n: int, n_fixed: int) -> tuple[int, int]:
    if vary == "n_p":
        return n, n_fixed
    if vary == "n_u":
        return n_fixed, n
    raise ValueError(f"vary must be 'n_p' or 'n_u', got {vary!r}")


def fig1_sweep(
    spec: GaussianMixtureSpec,
    n_grid,
    vary: str,
    n_fixed: int,
    trials: int = 50,
    seed=0,
    config: EstimatorConfig | None = None,
    threads: int = 1,
) -> list[tuple[int, float, float]]:
    """Squared estimation error against the quadrature value across sizes.

    Varies either the positive count (``vary='n_p'``, unlabeled fixed at
    ``n_fixed``) or the unlabeled count (``vary='n_u'``). For each grid
    size, ``trials`` fresh datasets are drawn from ``spec`` and estimated;
    rows are ``(n, mse_mean, mse_stderr)`` sorted by n, with the standard
    error taken over trials.
    """
    n_grid = sorted(int(n) for n in n_grid)
    if not n_grid:
        raise ValueError("n_grid must be non-empty")
    if trials < 2:
        raise ValueError(f"trials must be at least 2 for a standard error, got {trials}")
    root = _as_root(seed)
    cfg = config or EstimatorConfig()
    truth = true_smi_quadrature(spec)
    axis_code = 0 if vary == "n_p" else 1

    rows = []
    for n in n_grid:
        n_p, n_u = _sweep_axis(vary, n, n_fixed)

        def trial(t: int, n_p=n_p, n_u=n_u, n=n) -> float:
            data_ss, fit_ss = keyed_seed(root, axis_code, n, t).spawn(2)
            data = sample_gaussian_pu(spec, n_p, n_u, seed=data_ss)
            est, _, _ = estimate_smi(data, spec.prior, replace(cfg, seed=fit_ss))
            return (est.value - truth) ** 2

        errs = _run_trials(trial, trials, threads)
        rows.append(
            (n, float(np.mean(errs)), float(np.std(errs, ddof=1) / np.sqrt(trials)))
        )
    return rows


def fig1_sweep_labeled(
    data: LabeledDataset,
    prior: ClassPrior,
    n_grid,
    vary: str,
    n_fixed: int,
    trials: int = 50,
    seed=0,
    config: EstimatorConfig | None = None,
    threads: int = 1,
) -> list[tuple[int, float, float]]:
    """The estimation-error sweep for a labeled corpus instead of a generator.

    No closed-form truth exists for file data, so half the corpus is held
    out and the supervised estimate on it serves as the reference value;
    PU datasets are subsampled from the other half. Needs a corpus large
    enough that the sampling half covers the largest grid point at the
    requested prior.
    """
    n_grid = sorted(int(n) for n in n_grid)
    if not n_grid:
        raise ValueError("n_grid must be non-empty")
    if trials < 2:
        raise ValueError(f"trials must be at least 2 for a standard error, got {trials}")
    root = _as_root(seed)
    cfg = config or EstimatorConfig()

    n = data.features.shape[0]
    order = np.random.default_rng(keyed_seed(root, 2)).permutation(n)
    half = n // 2
    truth_pool = LabeledDataset(data.features[order[:half]], data.labels[order[:half]])
    sample_pool = LabeledDataset(data.features[order[half:]], data.labels[order[half:]])
    truth, _, _ = estimate_smi_pn(truth_pool, replace(cfg, seed=keyed_seed(root, 3)))
    axis_code = 0 if vary == "n_p" else 1

    rows = []
    for size in n_grid:
        n_p, n_u = _sweep_axis(vary, size, n_fixed)

        def trial(t: int, n_p=n_p, n_u=n_u, size=size) -> float:
            data_ss, fit_ss = keyed_seed(root, axis_code, size, t).spawn(2)
            pu = make_pu(sample_pool, n_p, n_u, prior, seed=data_ss)
            est, _, _ = estimate_smi(pu, prior, replace(cfg, seed=fit_ss))
            return (est.value - truth) ** 2

        errs = _run_trials(trial, trials, threads)
        rows.append(
            (size, float(np.mean(errs)), float(np.std(errs, ddof=1) / np.sqrt(trials)))
        )
    return rows


def toy_purl_config(
    epochs: int = 300, validation: PuDataset | None = None
) -> PurlConfig:
    """Training recipe for the two-dimensional toy study.

    A single linear unit as the map (2 -> 1) and a rectified linear head.
    The head deliberately has no batch normalisation: with a one-unit
    input, a learnable scale and shift can park the rectifier in an
    all-zero regime that is a genuine stationary point, and training never
    leaves it.
    """
    sgd = SgdConfig(
        learning_rate=5e-3,
        weight_decay=5e-4,
        grad_noise_std=0.01,
        batch_size=20,
    )
    return PurlConfig(
        v_spec=MlpSpec((2, 1)),
        w_spec=MlpSpec((1, 1), input_relu=True),
        sgd_w=sgd,
        sgd_v=sgd,
        epochs=epochs,
        patience=50,
        validation=validation,
    )


@dataclass(frozen=True)
class PurlToyResult:
    """Directions and projections from one run of the toy study.

    ``cos_horizontal`` is |cos| between the learned direction and the
    first coordinate axis (the class-separating one); ``cos_vertical`` is
    |cos| between the first principal component and the second axis (the
    high-variance one). ``eval_data`` is an independent labeled draw with
    its one-dimensional images under both maps.
    """

    purl_direction: np.ndarray
    pca_direction: np.ndarray
    cos_horizontal: float
    cos_vertical: float
    train: PurlResult
    eval_data: LabeledDataset
    purl_projection: np.ndarray
    pca_projection: np.ndarray


def _unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    return v / norm if norm > 0 else v


def purl_toy(
    spec: GaussianMixtureSpec,
    n_p: int = 200,
    n_u: int = 400,
    epochs: int = 300,
    restarts: int = 3,
    eval_n: int = 400,
    seed=0,
) -> PurlToyResult:
    """Train the linear toy map and compare it with the first PCA axis.

    Runs ``restarts`` independently initialised trainings on one shared
    dataset and keeps the run with the lowest training objective at its
    best iteration; restarts cover the occasional run that stalls in the
    rectifier's dead zone. PCA is computed on the unlabeled sample (the
    marginal draw).
    """
    if spec.dim != 2:
        raise ValueError(f"the toy study is two-dimensional, got dim {spec.dim}")
    if restarts < 1:
        raise ValueError(f"restarts must be at least 1, got {restarts}")
    root = _as_root(seed)
    data_ss, eval_ss, runs_ss = root.spawn(3)
    data = sample_gaussian_pu(spec, n_p, n_u, seed=data_ss)

    best: PurlResult | None = None
    best_score = np.inf
    for run_ss in runs_ss.spawn(restarts):
        result = train_purl(data, toy_purl_config(epochs=epochs), seed=run_ss)
        score = (
            result.history[result.best_iteration][0] if result.history else np.inf
        )
        if best is None or score < best_score:
            best, best_score = result, score

    direction = _unit(best.v_params.weights[0][:, 0].copy())
    components, _ = pca_project(data.unlabeled, 1)
    pca_direction = components[0]

    eval_data = sample_gaussian_labeled(spec, eval_n, seed=eval_ss)
    purl_projection = transform(best, eval_data.features)[:, 0]
    centered = eval_data.features - data.unlabeled.mean(axis=0)
    pca_projection = centered @ pca_direction

    return PurlToyResult(
        purl_direction=direction,
        pca_direction=pca_direction,
        cos_horizontal=abs(float(direction[0])),
        cos_vertical=abs(float(pca_direction[1])),
        train=best,
        eval_data=eval_data,
        purl_projection=purl_projection,
        pca_projection=pca_projection,
    )
