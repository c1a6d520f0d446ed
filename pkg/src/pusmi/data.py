"""Datasets and sampling.

Value types for fully labeled and positive-unlabeled (PU) data, readers and
writers for the LIBSVM and CSV text formats, PU subsampling from labeled
pools, and a two-Gaussian synthetic generator used throughout the
experiments.

All sampling helpers take an explicit seed and are deterministic given it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ParseError

__all__ = [
    "ClassPrior",
    "LabeledDataset",
    "PuDataset",
    "GaussianMixtureSpec",
    "MinMaxScaler",
    "load_libsvm",
    "save_libsvm",
    "load_csv",
    "make_pu",
    "sample_gaussian_pu",
    "sample_gaussian_labeled",
]


@dataclass(frozen=True)
class ClassPrior:
    """Marginal probability of the positive class.

    :param theta_p: positive-class probability, strictly inside (0, 1).
    """

    theta_p: float

    def __post_init__(self) -> None:
        if not 0.0 < self.theta_p < 1.0:
            raise ValueError(f"theta_p must lie strictly in (0, 1), got {self.theta_p}")

    @property
    def theta_n(self) -> float:
        """Negative-class probability, ``1 - theta_p``."""
        return 1.0 - self.theta_p

    @property
    def ratio(self) -> float:
        """Odds of the positive class, ``theta_p / theta_n``."""
        return self.theta_p / self.theta_n


def _as_feature_matrix(features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"features must be a 2-d array, got shape {X.shape}")
    return X


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with one label in {+1, -1} per row."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        X = _as_feature_matrix(self.features)
        y = np.asarray(self.labels, dtype=int)
        if y.shape != (X.shape[0],):
            raise ValueError(
                f"labels must be a vector with one entry per row, got shape "
                f"{y.shape} for {X.shape[0]} rows"
            )
        if X.shape[0] > 0 and X.shape[1] < 1:
            raise ValueError("feature dimension must be at least 1")
        if y.size > 0 and not np.all(np.isin(y, (-1, 1))):
            bad = y[~np.isin(y, (-1, 1))][0]
            raise ValueError(f"labels must be +1 or -1, got {bad}")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def positives(self) -> np.ndarray:
        """Rows with label +1."""
        return self.features[self.labels == 1]

    def negatives(self) -> np.ndarray:
        """Rows with label -1."""
        return self.features[self.labels == -1]


@dataclass(frozen=True)
class PuDataset:
    """A labeled-positive sample next to an unlabeled sample.

    Both matrices must share the same column count. Empty matrices are
    permitted at construction; estimation routines require at least one
    row on each side.
    """

    positives: np.ndarray
    unlabeled: np.ndarray

    def __post_init__(self) -> None:
        P = _as_feature_matrix(self.positives)
        U = _as_feature_matrix(self.unlabeled)
        if P.shape[1] != U.shape[1]:
            raise ValueError(
                f"positives ({P.shape[1]} columns) and unlabeled "
                f"({U.shape[1]} columns) must have the same dimension"
            )
        object.__setattr__(self, "positives", P)
        object.__setattr__(self, "unlabeled", U)

    @property
    def n_p(self) -> int:
        return self.positives.shape[0]

    @property
    def n_u(self) -> int:
        return self.unlabeled.shape[0]

    @property
    def dim(self) -> int:
        return self.positives.shape[1]


@dataclass(frozen=True)
class GaussianMixtureSpec:
    """Two Gaussian class conditionals with a shared diagonal covariance.

    The marginal density is ``theta_p * N(mean_pos, diag(cov_diag)) +
    (1 - theta_p) * N(mean_neg, diag(cov_diag))``.
    """

    mean_pos: np.ndarray
    mean_neg: np.ndarray
    cov_diag: np.ndarray
    prior: ClassPrior

    def __post_init__(self) -> None:
        mp = np.atleast_1d(np.asarray(self.mean_pos, dtype=float))
        mn = np.atleast_1d(np.asarray(self.mean_neg, dtype=float))
        cv = np.atleast_1d(np.asarray(self.cov_diag, dtype=float))
        if not (mp.shape == mn.shape == cv.shape) or mp.ndim != 1:
            raise ValueError(
                f"mean_pos, mean_neg and cov_diag must be vectors of one "
                f"shared length, got shapes {mp.shape}, {mn.shape}, {cv.shape}"
            )
        if not np.all(cv > 0):
            raise ValueError("cov_diag entries must be strictly positive")
        object.__setattr__(self, "mean_pos", mp)
        object.__setattr__(self, "mean_neg", mn)
        object.__setattr__(self, "cov_diag", cv)

    @property
    def dim(self) -> int:
        return self.mean_pos.shape[0]


def load_libsvm(path) -> LabeledDataset:
    """Read a LIBSVM-format text file into a dense :class:`LabeledDataset`.

    Each non-empty line is ``<label> <index>:<value> ...`` with 1-based,
    strictly ascending indices. Labels ``<= 0`` map to -1, positive labels
    to +1. The feature dimension is the largest index seen anywhere in the
    file; absent indices are zero.

    :raises ParseError: on malformed tokens or non-ascending indices, with
        the offending line number in the message.
    """
    rows: list[tuple[int, list[tuple[int, float]]]] = []
    dim = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                raw = float(tokens[0])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: malformed label {tokens[0]!r}") from None
            label = 1 if raw > 0 else -1
            entries: list[tuple[int, float]] = []
            prev = 0
            for token in tokens[1:]:
                idx_text, _, val_text = token.partition(":")
                try:
                    idx = int(idx_text)
                    val = float(val_text)
                except ValueError:
                    raise ParseError(
                        f"{path}:{lineno}: malformed feature entry {token!r}"
                    ) from None
                if idx <= prev:
                    raise ParseError(
                        f"{path}:{lineno}: feature indices must be ascending and "
                        f"1-based, got {idx} after {prev}"
                    )
                entries.append((idx, val))
                prev = idx
            if entries:
                dim = max(dim, entries[-1][0])
            rows.append((label, entries))

    X = np.zeros((len(rows), dim))
    y = np.empty(len(rows), dtype=int)
    for i, (label, entries) in enumerate(rows):
        y[i] = label
        for idx, val in entries:
            X[i, idx - 1] = val
    return LabeledDataset(X, y)


def save_libsvm(path, data: LabeledDataset) -> None:
    """Write a dataset in LIBSVM format, omitting zero-valued entries."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(data.n):
            parts = [f"{data.labels[i]:+d}"]
            row = data.features[i]
            for j in np.flatnonzero(row != 0.0):
                parts.append(f"{j + 1}:{float(row[j])!r}")
            fh.write(" ".join(parts) + "\n")


def load_csv(path) -> LabeledDataset:
    """Read a delimited text file into a :class:`LabeledDataset`.

    A header row is detected by attempting to parse the first line as
    numbers. With a header, the label column is the one named ``y`` if
    present, otherwise the last column; without one, the last column is the
    label. Labels ``<= 0`` map to -1.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        records = [row for row in csv.reader(fh) if row and any(f.strip() for f in row)]
    if not records:
        return LabeledDataset(np.zeros((0, 0)), np.zeros(0, dtype=int))

    def _numeric(fields: list[str]) -> bool:
        try:
            [float(f) for f in fields]
        except ValueError:
            return False
        return True

    label_col = len(records[0]) - 1
    offset = 1
    if not _numeric(records[0]):
        header = [f.strip() for f in records[0]]
        if "y" in header:
            label_col = header.index("y")
        records = records[1:]
        offset = 2

    width = len(records[0]) if records else 0
    X = np.empty((len(records), max(width - 1, 0)))
    y = np.empty(len(records), dtype=int)
    for i, row in enumerate(records):
        if len(row) != width:
            raise ParseError(
                f"{path}:{i + offset}: expected {width} fields, got {len(row)}"
            )
        try:
            values = [float(f) for f in row]
        except ValueError:
            raise ParseError(f"{path}:{i + offset}: non-numeric field") from None
        y[i] = 1 if values[label_col] > 0 else -1
        X[i] = [v for j, v in enumerate(values) if j != label_col]
    return LabeledDataset(X, y)


def make_pu(data: LabeledDataset, n_p: int, n_u: int, prior: ClassPrior, seed) -> PuDataset:
    """Draw a PU sample from a labeled pool.

    ``n_p`` positives are drawn without replacement, then ``n_u`` unlabeled
    points are drawn from the remaining rows: each unlabeled slot picks its
    class as Bernoulli(``prior.theta_p``) and consumes one unused sample of
    that class. No row appears twice.

    :raises CapacityError: when a class pool runs out, naming the class.
    """
    if n_p < 1 or n_u < 1:
        raise ValueError(f"n_p and n_u must be at least 1, got {n_p}, {n_u}")
    rng = np.random.default_rng(seed)
    pos_pool = rng.permutation(np.flatnonzero(data.labels == 1))
    neg_pool = rng.permutation(np.flatnonzero(data.labels == -1))
    if len(pos_pool) < n_p:
        raise CapacityError(
            f"positive class has {len(pos_pool)} samples, {n_p} labeled positives requested"
        )
    labeled_idx, pos_pool = pos_pool[:n_p], pos_pool[n_p:]

    take_pos = rng.random(n_u) < prior.theta_p
    need_pos = int(take_pos.sum())
    need_neg = n_u - need_pos
    if need_pos > len(pos_pool):
        raise CapacityError(
            f"positive class exhausted: unlabeled draw needs {need_pos} more "
            f"positives, only {len(pos_pool)} remain"
        )
    if need_neg > len(neg_pool):
        raise CapacityError(
            f"negative class exhausted: unlabeled draw needs {need_neg} "
            f"negatives, only {len(neg_pool)} remain"
        )
    unlabeled_idx = np.empty(n_u, dtype=int)
    unlabeled_idx[take_pos] = pos_pool[:need_pos]
    unlabeled_idx[~take_pos] = neg_pool[:need_neg]
    return PuDataset(data.features[labeled_idx], data.features[unlabeled_idx])


def sample_gaussian_pu(spec: GaussianMixtureSpec, n_p: int, n_u: int, seed) -> PuDataset:
    """Draw a PU sample directly from a Gaussian mixture.

    Positives come from the positive conditional; each unlabeled point
    first picks its latent class as Bernoulli(``theta_p``).
    """
    if n_p < 1 or n_u < 1:
        raise ValueError(f"n_p and n_u must be at least 1, got {n_p}, {n_u}")
    rng = np.random.default_rng(seed)
    scale = np.sqrt(spec.cov_diag)
    positives = rng.normal(spec.mean_pos, scale, size=(n_p, spec.dim))
    latent_pos = rng.random(n_u) < spec.prior.theta_p
    means = np.where(latent_pos[:, None], spec.mean_pos, spec.mean_neg)
    unlabeled = rng.normal(means, scale, size=(n_u, spec.dim))
    return PuDataset(positives, unlabeled)


def sample_gaussian_labeled(spec: GaussianMixtureSpec, n: int, seed) -> LabeledDataset:
    """Draw a fully labeled sample from a Gaussian mixture."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    labels = np.where(rng.random(n) < spec.prior.theta_p, 1, -1)
    means = np.where(labels[:, None] == 1, spec.mean_pos, spec.mean_neg)
    features = rng.normal(means, np.sqrt(spec.cov_diag), size=(n, spec.dim))
    return LabeledDataset(features, labels)


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-feature affine map onto [0, 1], fitted on a reference matrix.

    Columns that are constant in the reference matrix map to 0.
    """

    mins: np.ndarray
    maxs: np.ndarray

    @classmethod
    def fit(cls, features) -> "MinMaxScaler":
        X = _as_feature_matrix(features)
        if X.shape[0] < 1:
            raise ValueError("cannot fit a scaler on an empty matrix")
        return cls(X.min(axis=0), X.max(axis=0))

    def transform(self, features) -> np.ndarray:
        X = _as_feature_matrix(features)
        span = self.maxs - self.mins
        safe = np.where(span > 0, span, 1.0)
        out = (X - self.mins) / safe
        return np.where(span > 0, out, 0.0)
