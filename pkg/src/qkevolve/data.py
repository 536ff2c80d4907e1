"""Datasets, preprocessing (PCA to a variance target, scaling to [-pi/2, pi/2]) and splitting."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

log = logging.getLogger(__name__)

SPLIT_FRACTIONS = (0.48, 0.32, 0.20)
HALF_PI = np.pi / 2


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    name: str = ""
    split: str = "all"
    feature_names: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise DataError(f"{X.shape[0]} rows but {y.shape[0]} labels")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(np.unique(self.y))

    def subset(self, idx, split: str) -> "Dataset":
        return replace(self, X=self.X[idx], y=self.y[idx], split=split)

    def to_json(self) -> str:
        return json.dumps({
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "meta": {"name": self.name, "split": self.split, "feature_names": list(self.feature_names)},
        })

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        d = json.loads(text)
        meta = d.get("meta", {})
        X = np.asarray(d["X"], dtype=np.float64).reshape(len(d["y"]), -1)
        return cls(X, np.asarray(d["y"]), meta.get("name", ""), meta.get("split", "all"),
                   tuple(meta.get("feature_names", ())))


class Splits(NamedTuple):
    train: Dataset
    validation: Dataset
    test: Dataset


# -- synthetic generators ---------------------------------------------------

def _balanced_counts(n_samples: int) -> int:
    if n_samples < 2 or n_samples % 2:
        raise DataError("n_samples must be even and >= 2")
    return n_samples // 2


def make_moons(n_samples: int = 400, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaving half circles."""
    half = _balanced_counts(n_samples)
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, np.pi, half)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    X = np.vstack([upper, lower]) + noise * rng.standard_normal((n_samples, 2))
    y = np.repeat([0, 1], half)
    perm = rng.permutation(n_samples)
    return Dataset(X[perm], y[perm], "moons")


def make_circles(n_samples: int = 400, noise: float = 0.1, seed: int = 0, factor: float = 0.5) -> Dataset:
    """An outer circle (label 0) around an inner circle of radius ``factor`` (label 1)."""
    half = _balanced_counts(n_samples)
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 2 * np.pi, half, endpoint=False)
    ring = np.column_stack([np.cos(t), np.sin(t)])
    X = np.vstack([ring, factor * ring]) + noise * rng.standard_normal((n_samples, 2))
    y = np.repeat([0, 1], half)
    perm = rng.permutation(n_samples)
    return Dataset(X[perm], y[perm], "circles")


def make_xor(n_samples: int = 400, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Gaussian blobs at (+-1, +-1); label 1 when the coordinate signs agree."""
    half = _balanced_counts(n_samples)
    rng = np.random.default_rng(seed)
    centers = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    # two blobs per class, sizes differ by at most one
    sizes = [half - half // 2, half // 2, half - half // 2, half // 2]
    X = np.vstack([c + noise * rng.standard_normal((s, 2)) for c, s in zip(centers, sizes)])
    y = np.repeat([1, 1, 0, 0], sizes)
    perm = rng.permutation(n_samples)
    return Dataset(X[perm], y[perm], "xor")


# -- CSV ingestion -----------------------------------------------------------

def _is_missing(v: str) -> bool:
    return v.strip() in ("", "?", "NA", "NaN", "nan", "null")


def _to_float(v: str) -> float | None:
    try:
        return float(v)
    except ValueError:
        return None


def load_csv(
    path,
    label_column: str | int = -1,
    categorical: str = "encode",
    categorical_columns: tuple[str, ...] = (),
    drop_columns: tuple[str, ...] = (),
    name: str | None = None,
) -> Dataset:
    """Read a header-row CSV into a :class:`Dataset`.

    Column types are inferred from the first non-missing value unless listed in
    ``categorical_columns``. With ``categorical="encode"`` categorical values
    become integers in order of first appearance; ``"error"`` rejects them.
    Rows with missing values are dropped with a warning. Labels are mapped to
    ``0..C-1`` in sorted order of their raw values.
    """
    if categorical not in ("encode", "error"):
        raise ValueError("categorical must be 'encode' or 'error'")
    path = Path(path)
    with path.open(newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = [h.strip() for h in rows[0]], [r for r in rows[1:] if r]
    if isinstance(label_column, int):
        label_idx = label_column % len(header)
    elif label_column in header:
        label_idx = header.index(label_column)
    else:
        raise DataError(f"{path}: label column {label_column!r} not in header")
    keep = [i for i, h in enumerate(header) if i != label_idx and h not in drop_columns]

    complete = []
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        if any(_is_missing(r[i]) for i in keep + [label_idx]):
            continue
        complete.append((lineno, r))
    dropped = len(body) - len(complete)
    if dropped:
        log.warning("%s: dropped %d rows with missing values", path, dropped)

    columns = []
    for i in keep:
        first = complete[0][1][i] if complete else "0"
        is_cat = header[i] in categorical_columns or _to_float(first) is None
        if is_cat:
            if categorical == "error":
                raise DataError(f"{path}: column {header[i]!r} is not numeric")
            codes: dict[str, int] = {}
            columns.append([codes.setdefault(r[i].strip(), len(codes)) for _, r in complete])
        else:
            col = []
            for lineno, r in complete:
                v = _to_float(r[i])
                if v is None:
                    raise DataError(f"{path}:{lineno}: non-numeric value {r[i]!r} in column {header[i]!r}")
                col.append(v)
            columns.append(col)
    X = np.asarray(columns, dtype=np.float64).T.reshape(len(complete), len(keep))

    raw = [r[label_idx].strip() for _, r in complete]
    numeric = all(_to_float(v) is not None for v in raw)
    uniq = sorted(set(raw), key=(lambda v: float(v)) if numeric else None)
    lookup = {v: k for k, v in enumerate(uniq)}
    y = np.asarray([lookup[v] for v in raw], dtype=np.int64)
    return Dataset(X, y, name or path.stem, "all", tuple(header[i] for i in keep))


# bundled and external real datasets: file name, label column, dropped columns
REAL_DATASETS = {
    "wine": ("wine.csv", "target", ()),
    "iris": ("iris.csv", "target", ()),
    "cancer": ("cancer.csv", "target", ()),
    "irrigation": ("irrigation.csv", -1, ()),
    "parkinsons": ("parkinsons.csv", "status", ("name",)),
    "drug": ("drug200.csv", "Drug", ()),
}
SYNTHETIC_DATASETS = {"moons": make_moons, "xor": make_xor, "circles": make_circles}
DATASET_NAMES = ("moons", "xor", "circles", "wine", "iris", "cancer", "irrigation", "parkinsons", "drug")


def dataset_path(name: str, data_dir=None) -> Path:
    """Locate a real dataset CSV: ``data_dir``, then ``$QKEVOLVE_DATA_DIR``, then the bundled copies."""
    fname = REAL_DATASETS[name][0]
    for d in (data_dir, os.environ.get("QKEVOLVE_DATA_DIR")):
        if d and (Path(d) / fname).exists():
            return Path(d) / fname
    bundled = resources.files("qkevolve") / "datasets" / fname
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(
        f"dataset {name!r} is not bundled; place {fname} in a directory and pass "
        f"--data-dir or set QKEVOLVE_DATA_DIR"
    )


def load_dataset(name: str, seed: int = 0, n_samples: int = 400, noise: float = 0.1, data_dir=None) -> Dataset:
    if name in SYNTHETIC_DATASETS:
        return SYNTHETIC_DATASETS[name](n_samples, noise, seed)
    if name in REAL_DATASETS:
        _, label, drop = REAL_DATASETS[name]
        return load_csv(dataset_path(name, data_dir), label_column=label, drop_columns=drop, name=name)
    raise DataError(f"unknown dataset {name!r}")


# -- PCA and scaling -----------------------------------------------------------

@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray  # (m, r), orthonormal columns
    explained_variance_ratio: np.ndarray  # (r,)

    @property
    def n_components(self) -> int:
        return self.components.shape[1]


def fit_pca(X, variance_target: float = 0.95, standardize: bool = True) -> PcaModel:
    """Keep the fewest components whose cumulative explained variance reaches the target.

    With ``standardize`` the features are z-scored first (correlation-matrix
    PCA), which keeps raw feature units from dominating the spectrum.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] < 2:
        raise DataError("PCA needs at least two rows")
    if not 0 < variance_target <= 1:
        raise DataError("variance_target must lie in (0, 1]")
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1)
    scale = np.where(std > 0, std, 1.0) if standardize else np.ones_like(mean)
    Z = (X - mean) / scale
    cov = Z.T @ Z / (X.shape[0] - 1)
    w, V = np.linalg.eigh(0.5 * (cov + cov.T))
    order = np.argsort(w)[::-1]
    w, V = np.clip(w[order], 0.0, None), V[:, order]
    total = w.sum()
    if total <= 0:
        log.warning("zero-variance data; keeping one component")
        r = 1
        ratio = np.zeros(len(w))
    else:
        ratio = w / total
        r = int(np.searchsorted(np.cumsum(ratio), variance_target - 1e-12) + 1)
        r = min(r, len(w))
    comps = V[:, :r]
    flip = np.sign(comps[np.argmax(np.abs(comps), axis=0), np.arange(r)])
    comps = comps * np.where(flip == 0, 1.0, flip)
    return PcaModel(mean, scale, comps, ratio[:r])


def transform_pca(model: PcaModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.mean.shape[0]:
        raise DataError(f"expected {model.mean.shape[0]} columns, got {X.shape[1]}")
    return ((X - model.mean) / model.scale) @ model.components


@dataclass(frozen=True)
class ScalerModel:
    min: np.ndarray
    max: np.ndarray


def fit_scale(X_train) -> ScalerModel:
    X = np.atleast_2d(np.asarray(X_train, dtype=np.float64))
    return ScalerModel(X.min(axis=0), X.max(axis=0))


def apply_scale(model: ScalerModel, X) -> np.ndarray:
    """Affine map of the training range onto [-pi/2, pi/2]; constant features map to 0, no clipping."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    span = model.max - model.min
    safe = np.where(span > 0, span, 1.0)
    out = -HALF_PI + (X - model.min) * (np.pi / safe)
    # pin the training extremes exactly
    out = np.where(X == model.max, HALF_PI, out)
    out = np.where(X == model.min, -HALF_PI, out)
    return np.where(span > 0, out, 0.0)


# -- splitting -----------------------------------------------------------------

def split_sizes(n: int, fractions=SPLIT_FRACTIONS) -> tuple[int, int, int]:
    """Test takes ceil(f_test * n); validation takes ceil of its share of the rest; train keeps the remainder."""
    f_train, f_val, f_test = fractions
    if abs(f_train + f_val + f_test - 1.0) > 1e-9 or min(fractions) < 0:
        raise DataError("split fractions must be non-negative and sum to 1")
    n_test = min(n, math.ceil(f_test * n - 1e-9))
    rest = n - n_test
    share = f_val / (f_train + f_val) if f_train + f_val > 0 else 0.0
    n_val = min(rest, math.ceil(share * rest - 1e-9))
    return rest - n_val, n_val, n_test


def _apportion(counts: np.ndarray, total: int) -> np.ndarray:
    # largest-remainder allocation of `total` across strata proportional to `counts`
    if counts.sum() == 0:
        return np.zeros_like(counts)
    quota = counts * total / counts.sum()
    alloc = np.floor(quota).astype(np.int64)
    order = np.lexsort((np.arange(len(counts)), -(quota - alloc)))
    alloc[order[: total - alloc.sum()]] += 1
    return np.minimum(alloc, counts)


def split_indices(y, fractions=SPLIT_FRACTIONS, seed: int = 0, stratified: bool = True):
    y = np.asarray(y)
    n = len(y)
    n_train, n_val, n_test = split_sizes(n, fractions)
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(y, return_counts=True)
    if stratified and counts.min() < 3:
        log.warning("a class has fewer than 3 members; falling back to an unstratified split")
        stratified = False
    if not stratified:
        perm = rng.permutation(n)
        return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]
    pools = [rng.permutation(np.flatnonzero(y == c)) for c in classes]
    remaining = counts.copy()
    test_alloc = _apportion(remaining, n_test)
    remaining = remaining - test_alloc
    val_alloc = _apportion(remaining, n_val)
    train, val, test = [], [], []
    for pool, nt, nv in zip(pools, test_alloc, val_alloc):
        test.append(pool[:nt])
        val.append(pool[nt:nt + nv])
        train.append(pool[nt + nv:])
    return tuple(rng.permutation(np.concatenate(part)) for part in (train, val, test))


def split(data: Dataset, fractions=SPLIT_FRACTIONS, seed: int = 0, stratified: bool = True) -> Splits:
    tr, va, te = split_indices(data.y, fractions, seed, stratified)
    return Splits(data.subset(tr, "train"), data.subset(va, "validation"), data.subset(te, "test"))


@dataclass(frozen=True)
class Preprocessed:
    splits: Splits
    pca: PcaModel
    scaler: ScalerModel


def preprocess(
    data: Dataset,
    seed: int = 0,
    variance_target: float = 0.95,
    pca_on_full: bool = False,
    stratified: bool = True,
) -> Preprocessed:
    """Split, then PCA-reduce and scale every split with parameters fitted on the training split.

    ``pca_on_full`` fits the PCA on the whole dataset instead (the scaler still
    uses training rows only).
    """
    raw = split(data, seed=seed, stratified=stratified)
    pca = fit_pca(data.X if pca_on_full else raw.train.X, variance_target)
    reduced = [transform_pca(pca, part.X) for part in raw]
    scaler = fit_scale(reduced[0])
    parts = [replace(part, X=apply_scale(scaler, Xr)) for part, Xr in zip(raw, reduced)]
    return Preprocessed(Splits(*parts), pca, scaler)
