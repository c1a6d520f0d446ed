"""Representation learning by alternating minimisation.

A representation network ``v`` maps inputs to a lower-dimensional code
and a score head ``w`` maps codes to a scalar; their composition is
trained to minimise the PU fitting objective

    J = 1/(2 n_u) sum_k (w.v)(x_k^U)^2 - 1/n_p sum_i (w.v)(x_i^P),

so that ``-J - 1/2`` tracks (a lower bound on) the mutual information
carried by the code. The two networks are updated in alternation, several
head steps per representation step, mirroring the asymmetric roles: the
head chases the current code's density ratio, the code moves to make that
ratio informative. The class prior is never needed, since it only scales
the objective by a constant.

Also provides a PCA projector used as the unsupervised baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import PuDataset
from .errors import DegenerateDataError, DivergenceError
from .mlp import MlpParams, MlpSpec, SgdConfig, backward, forward, init_params, sgd_step

__all__ = [
    "PurlConfig",
    "PurlResult",
    "train_purl",
    "transform",
    "head_scores",
    "pca_project",
]


@dataclass(frozen=True)
class PurlConfig:
    """Architecture and schedule for alternating training.

    The head input width must equal the representation output width, and
    the representation must compress (output narrower than input). The
    ``validation`` set, when given, drives early stopping and model
    selection; otherwise the training objective does.
    """

    v_spec: MlpSpec
    w_spec: MlpSpec
    sgd_w: SgdConfig
    sgd_v: SgdConfig
    w_steps_per_v_step: int = 4
    epochs: int = 200
    patience: int = 20
    validation: PuDataset | None = None

    def __post_init__(self) -> None:
        if self.v_spec.out_dim != self.w_spec.in_dim:
            raise ValueError(
                f"representation output width {self.v_spec.out_dim} must match "
                f"head input width {self.w_spec.in_dim}"
            )
        if self.v_spec.out_dim >= self.v_spec.in_dim:
            raise ValueError(
                f"representation must compress: output width "
                f"{self.v_spec.out_dim} >= input width {self.v_spec.in_dim}"
            )
        if self.w_spec.out_dim != 1:
            raise ValueError(f"head must output a scalar, got width {self.w_spec.out_dim}")
        if self.w_steps_per_v_step < 1:
            raise ValueError("w_steps_per_v_step must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass
class PurlResult:
    """Trained networks plus the per-epoch objective history.

    ``history`` rows are ``(train objective, validation objective)`` with
    NaN in the second slot when no validation set was given;
    ``best_iteration`` indexes the row the returned parameters come from.
    Zero-epoch training leaves the history empty and returns the freshly
    initialised parameters.
    """

    v_spec: MlpSpec
    w_spec: MlpSpec
    v_params: MlpParams
    w_params: MlpParams
    history: tuple[tuple[float, float], ...]
    best_iteration: int


class _Pool:
    """Without-replacement index stream that reshuffles when exhausted."""

    def __init__(self, n: int, rng: np.random.Generator) -> None:
        self._n = n
        self._rng = rng
        self._order = rng.permutation(n)
        self._at = 0

    def take(self, k: int) -> np.ndarray:
        out = []
        while k > 0:
            if self._at == self._n:
                self._order = self._rng.permutation(self._n)
                self._at = 0
            grab = min(k, self._n - self._at)
            out.append(self._order[self._at : self._at + grab])
            self._at += grab
            k -= grab
        return np.concatenate(out)


def _objective(config: PurlConfig, v_params: MlpParams, w_params: MlpParams,
               data: PuDataset) -> float:
    """Full-data objective with both networks in eval mode."""
    rep_p, _ = forward(v_params, config.v_spec, data.positives, "eval")
    rep_u, _ = forward(v_params, config.v_spec, data.unlabeled, "eval")
    out_p, _ = forward(w_params, config.w_spec, rep_p, "eval")
    out_u, _ = forward(w_params, config.w_spec, rep_u, "eval")
    return 0.5 * float(np.mean(out_u[:, 0] ** 2)) - float(np.mean(out_p[:, 0]))


def train_purl(data: PuDataset, config: PurlConfig, seed, step_hook=None) -> PurlResult:
    """Alternate head and representation updates on mini-batches.

    Each mini-batch mixes positives and unlabeled points in the same
    proportion as the dataset (at least one of each). Per outer step the
    head is updated on ``w_steps_per_v_step`` fresh batches, then the
    representation on one more. Training stops at ``epochs`` or when the
    monitored objective has not improved for ``patience`` epochs; the
    returned parameters are the best seen, not the last.

    ``step_hook``, when given, is called as ``step_hook(kind)`` with
    ``"w"`` or ``"v"`` after each parameter update.

    :raises DivergenceError: when the objective becomes non-finite.
    """
    if data.n_p < 1 or data.n_u < 1:
        raise ValueError("training needs at least one positive and one unlabeled sample")
    if data.dim != config.v_spec.in_dim:
        raise ValueError(
            f"data dimension {data.dim} does not match network input "
            f"width {config.v_spec.in_dim}"
        )
    for sgd in (config.sgd_w, config.sgd_v):
        if sgd.batch_size < 2:
            raise ValueError("batch sizes below 2 cannot mix both sample kinds")
    if config.validation is not None and config.validation.dim != data.dim:
        raise ValueError("validation set dimension does not match training data")

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    init_v, init_w, pools_seed, noise_w, noise_v = ss.spawn(5)
    v_params = init_params(config.v_spec, init_v)
    w_params = init_params(config.w_spec, init_w)
    pool_rng = np.random.default_rng(pools_seed)
    p_pool, u_pool = _Pool(data.n_p, pool_rng), _Pool(data.n_u, pool_rng)
    rng_w = np.random.default_rng(noise_w)
    rng_v = np.random.default_rng(noise_v)

    n_total = data.n_p + data.n_u
    cycle = config.w_steps_per_v_step + 1

    def _batch(batch_size: int) -> tuple[np.ndarray, np.ndarray]:
        m_p = min(max(1, math.ceil(batch_size * data.n_p / n_total)), batch_size - 1)
        return data.positives[p_pool.take(m_p)], data.unlabeled[u_pool.take(batch_size - m_p)]

    def _step(update: str) -> None:
        batch_size = (config.sgd_w if update == "w" else config.sgd_v).batch_size
        x_p, x_u = _batch(batch_size)
        m_p, m_u = x_p.shape[0], x_u.shape[0]
        rep, cache_v = forward(v_params, config.v_spec, np.vstack([x_p, x_u]), "train")
        out, cache_w = forward(w_params, config.w_spec, rep, "train")
        g = np.empty_like(out)
        g[:m_p, 0] = -1.0 / m_p
        g[m_p:, 0] = out[m_p:, 0] / m_u
        grads_w, g_rep = backward(cache_w, g)
        if update == "w":
            return sgd_step(w_params, grads_w, config.sgd_w, rng_w)
        grads_v, _ = backward(cache_v, g_rep)
        return sgd_step(v_params, grads_v, config.sgd_v, rng_v)

    monitor = data if config.validation is None else config.validation
    history: list[tuple[float, float]] = []
    best_score = math.inf
    best = (v_params.clone(), w_params.clone())
    best_iteration = 0
    stale = 0

    steps_per_epoch = max(1, (n_total // config.sgd_w.batch_size) // cycle)
    for epoch in range(config.epochs):
        for _ in range(steps_per_epoch):
            for _ in range(config.w_steps_per_v_step):
                w_params = _step("w")
                if step_hook is not None:
                    step_hook("w")
            v_params = _step("v")
            if step_hook is not None:
                step_hook("v")
        train_j = _objective(config, v_params, w_params, data)
        val_j = (
            _objective(config, v_params, w_params, config.validation)
            if config.validation is not None
            else math.nan
        )
        history.append((train_j, val_j))
        score = train_j if config.validation is None else val_j
        if not math.isfinite(score):
            raise DivergenceError(
                f"objective became non-finite at epoch {epoch}: "
                f"train={train_j!r}, validation={val_j!r}"
            )
        if score < best_score:
            best_score = score
            best = (v_params.clone(), w_params.clone())
            best_iteration = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    return PurlResult(
        v_spec=config.v_spec,
        w_spec=config.w_spec,
        v_params=best[0],
        w_params=best[1],
        history=tuple(history),
        best_iteration=best_iteration,
    )


def transform(result: PurlResult, points: np.ndarray) -> np.ndarray:
    """Map points through the trained representation (eval mode)."""
    rep, _ = forward(result.v_params, result.v_spec, points, "eval")
    return rep


def head_scores(result: PurlResult, points: np.ndarray) -> np.ndarray:
    """Composite score ``(w . v)(x)`` of the trained networks (eval mode)."""
    out, _ = forward(result.w_params, result.w_spec, transform(result, points), "eval")
    return out[:, 0]


def pca_project(points: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-k principal components by power iteration with deflation.

    Returns ``(components, projected)`` where ``components`` has one unit
    row per component (largest-magnitude entry positive) and ``projected``
    holds the centred data mapped onto them. Deterministic: each iteration
    starts from the coordinate axis with the largest remaining variance.

    :raises DegenerateDataError: when the data has zero variance.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a 2-d array with at least two rows")
    d = X.shape[1]
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (X.shape[0] - 1)
    scale = float(np.trace(cov))
    if scale <= 0.0:
        raise DegenerateDataError("data has zero variance in every direction")

    components: list[np.ndarray] = []

    def _orthogonalize(v: np.ndarray) -> np.ndarray:
        for u in components:
            v = v - (u @ v) * u
        return v

    deflated = cov.copy()
    for _ in range(k):
        start = int(np.argmax(np.diag(deflated)))
        v = _orthogonalize(np.eye(d)[start])
        norm = np.linalg.norm(v)
        if np.diag(deflated)[start] <= 1e-14 * scale or norm < 1e-8:
            # ran out of variance; extend with any remaining axis
            for axis in range(d):
                v = _orthogonalize(np.eye(d)[axis])
                norm = np.linalg.norm(v)
                if norm > 0.5:
                    break
        v = v / norm
        for _ in range(10000):
            nxt = _orthogonalize(deflated @ v)
            norm = np.linalg.norm(nxt)
            if norm <= 1e-14 * scale:
                break
            nxt = nxt / norm
            if min(np.linalg.norm(nxt - v), np.linalg.norm(nxt + v)) < 1e-13:
                v = nxt
                break
            v = nxt
        lead = int(np.argmax(np.abs(v)))
        if v[lead] < 0:
            v = -v
        components.append(v)
        value = float(v @ deflated @ v)
        deflated = deflated - value * np.outer(v, v)

    comp = np.vstack(components)
    return comp, centered @ comp.T
