"""Dataset ingestion, scaling, and shuffled k-fold splitting.

Inputs are kept in raw units inside `Dataset`; scaling is explicit and
carries its state so predictions can be mapped back. Min-max scaling to
[0, 1] matches the shifted-Legendre basis domain; outputs use z-scores
with the population standard deviation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

SCALER_KINDS = ("min_max_per_column", "z_normalize")


@dataclass(frozen=True)
class Dataset:
    """A numeric regression table: N rows of n_x inputs and one target."""

    inputs: np.ndarray
    outputs: np.ndarray
    column_names: list
    target_name: str = "y"

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.outputs, dtype=float).ravel()
        if x.ndim != 2:
            raise ValueError("inputs must be a 2-d matrix")
        if x.shape[0] < 2:
            raise ValueError(f"need at least 2 rows, got {x.shape[0]}")
        if x.shape[1] < 1:
            raise ValueError("need at least one input column")
        if y.shape[0] != x.shape[0]:
            raise ValueError(
                f"outputs length {y.shape[0]} does not match {x.shape[0]} input rows"
            )
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ValueError("dataset contains non-finite values")
        if len(self.column_names) != x.shape[1]:
            raise ValueError("column_names length must match input column count")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "outputs", y)

    @property
    def n_points(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[1]


def _sniff_delimiter(header_line: str) -> str:
    # restricted to the two supported delimiters
    return ";" if header_line.count(";") > header_line.count(",") else ","


def load_csv(path, target_columns) -> list:
    """Load a numeric CSV with a header row into one Dataset per target.

    Parameters
    ----------
    path : str or Path
        File to read. Comma or semicolon delimited, UTF-8, header row.
    target_columns : list of str
        Column names to split out as regression targets. All listed
        columns are removed from the inputs of every returned Dataset.

    Returns
    -------
    list of Dataset
        One per entry of ``target_columns``, in the same order.

    Raises
    ------
    FileNotFoundError
        If the file does not exist.
    ValueError
        For a missing target column, a non-numeric or empty cell, or a
        ragged row; each with a distinct message locating the problem.
    """
    targets = list(target_columns)
    if not targets:
        raise ValueError("at least one target column is required")

    with open(path, "r", encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first.strip():
            raise ValueError(f"{path}: empty file or blank header row")
        delim = _sniff_delimiter(first)
        header = [h.strip() for h in next(csv.reader([first], delimiter=delim))]
        rows = []
        for lineno, row in enumerate(csv.reader(fh, delimiter=delim), start=2):
            if not row or all(not c.strip() for c in row):
                continue  # tolerate trailing blank lines
            if len(row) != len(header):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            parsed = []
            for name, cell in zip(header, row):
                text = cell.strip()
                if not text:
                    raise ValueError(
                        f"{path}:{lineno}: missing value in column {name!r}"
                    )
                try:
                    parsed.append(float(text))
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: non-numeric value {text!r} "
                        f"in column {name!r}"
                    ) from None
            rows.append(parsed)

    for t in targets:
        if t not in header:
            raise ValueError(
                f"{path}: target column {t!r} not found; columns are {header}"
            )
    if not rows:
        raise ValueError(f"{path}: no data rows")

    table = np.asarray(rows, dtype=float)
    target_idx = [header.index(t) for t in targets]
    input_idx = [i for i in range(len(header)) if i not in target_idx]
    input_names = [header[i] for i in input_idx]

    return [
        Dataset(
            inputs=table[:, input_idx],
            outputs=table[:, ti],
            column_names=input_names,
            target_name=header[ti],
        )
        for ti in target_idx
    ]


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalerState:
    """Fitted affine per-column scaler.

    ``loc`` and ``scale`` are per-column vectors such that
    ``scaled = (raw - loc) / scale``; for min_max they are (min, max - min),
    for z_normalize (mean, population std).
    """

    kind: str
    loc: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if self.kind not in SCALER_KINDS:
            raise ValueError(f"unknown scaler kind {self.kind!r}")
        object.__setattr__(self, "loc", np.asarray(self.loc, dtype=float).ravel())
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=float).ravel())

    @property
    def n_columns(self) -> int:
        return self.loc.shape[0]


def fit_scaler(kind: str, data) -> ScalerState:
    """Fit a min-max or z-score scaler column-wise.

    ``data`` is a vector (treated as one column) or an N x d matrix.
    Constant columns (min_max) and zero-variance columns (z_normalize)
    raise a ValueError naming the offending column index.
    """
    a = np.asarray(data, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] < 2:
        raise ValueError("scaler fitting needs at least 2 rows")
    if not np.all(np.isfinite(a)):
        raise ValueError("scaler fitting data must be finite")

    if kind == "min_max_per_column":
        lo = a.min(axis=0)
        hi = a.max(axis=0)
        flat = np.nonzero(hi <= lo)[0]
        if flat.size:
            raise ValueError(
                f"min_max scaler: column {flat[0]} is constant "
                f"(value {lo[flat[0]]:g})"
            )
        return ScalerState(kind, lo, hi - lo)
    if kind == "z_normalize":
        mean = a.mean(axis=0)
        std = a.std(axis=0)  # population std
        flat = np.nonzero(std <= 0.0)[0]
        if flat.size:
            raise ValueError(f"z_normalize scaler: column {flat[0]} has zero variance")
        return ScalerState(kind, mean, std)
    raise ValueError(f"unknown scaler kind {kind!r}")


def _check_width(state: ScalerState, a: np.ndarray):
    if a.shape[-1] != state.n_columns:
        raise ValueError(
            f"point has {a.shape[-1]} columns, scaler was fitted on "
            f"{state.n_columns}"
        )


def apply_scaler(state: ScalerState, point):
    """Apply the fitted affine map to a point (vector) or matrix of rows.

    No clamping: inputs outside the fitted range map outside [0, 1].
    """
    a = np.asarray(point, dtype=float)
    squeeze = a.ndim == 1
    if squeeze:
        a = a[None, :]
    _check_width(state, a)
    out = (a - state.loc) / state.scale
    return out[0] if squeeze else out


def inverse_scale(state: ScalerState, scaled):
    """Invert apply_scaler exactly (up to float rounding)."""
    a = np.asarray(scaled, dtype=float)
    squeeze = a.ndim == 1
    if squeeze:
        a = a[None, :]
    _check_width(state, a)
    out = a * state.scale + state.loc
    return out[0] if squeeze else out


def inverse_scale_prediction(state: ScalerState, mean_s: float, var_s: float):
    """Map a predictive mean and variance from scaled to raw output units.

    The mean is affinely inverted; the variance picks up the squared scale
    factor. Only single-column (output) scalers are accepted.
    """
    if state.n_columns != 1:
        raise ValueError("prediction rescaling expects a single-output scaler")
    if var_s < 0.0:
        raise ValueError(f"variance must be non-negative, got {var_s}")
    s = float(state.scale[0])
    mean = float(mean_s) * s + float(state.loc[0])
    var = float(var_s) * s * s
    return mean, var


# ---------------------------------------------------------------------------
# k-fold splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    """Shuffled k-fold assignment: ``assignments[i]`` is row i's fold."""

    n_folds: int
    assignments: np.ndarray
    rng_seed: int

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=int)
        object.__setattr__(self, "assignments", a)
        if self.n_folds < 2:
            raise ValueError("need at least 2 folds")
        if a.min(initial=0) < 0 or (a.size and a.max() >= self.n_folds):
            raise ValueError("fold assignments out of range")
        sizes = np.bincount(a, minlength=self.n_folds)
        if sizes.max() - sizes.min() > 1:
            raise ValueError("fold sizes must differ by at most 1")

    def test_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignments == fold)[0]

    def train_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignments != fold)[0]


def make_folds(n: int, n_folds: int, seed: int) -> FoldPlan:
    """Randomly partition {0..n-1} into n_folds near-equal folds.

    Deterministic for a given seed; fold sizes differ by at most one.
    """
    if not 2 <= n_folds <= n:
        raise ValueError(f"n_folds must be in [2, {n}], got {n_folds}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    assignments = np.empty(n, dtype=int)
    assignments[perm] = np.arange(n) % n_folds
    return FoldPlan(n_folds=n_folds, assignments=assignments, rng_seed=seed)
