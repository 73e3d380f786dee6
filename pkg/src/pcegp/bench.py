"""Benchmark harness: outer k-fold RMSE for the searched model and a baseline.

The protocol is shuffled 10-fold cross-validation with all error reported
in raw output units. Two tuning modes exist: nested (the search runs
inside every outer fold on that fold's training portion, so held-out
points never influence tuning) and non-nested (one search on the full
data, then per-fold refits), the latter costing roughly one k-th as much.

The baseline is a single stationary squared-exponential kernel with one
lengthscale per input dimension, plus a learned noise variance, optimized
by Adam on the marginal log likelihood. No search stage, no expansions.
"""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from .data import Dataset, apply_scaler, fit_scaler, load_csv, make_folds
from .gp import fit_precompute, predict_batch
from .kernels import KernelForm, ladder_cholesky
from .optim import AdamState, SearchSpace, adam_step, run_search
from .poly import Basis


def benchmark_space(
    q_range=(5, 10),
    coeff_range=(-2.0, 2.0),
    scale_range=(1e-3, 10.0),
    noise_fixed=1e-4,
) -> SearchSpace:
    """The fixed four-kernel, shifted-Legendre setup used for the benchmarks."""
    return SearchSpace(
        kernel_forms=(
            KernelForm.se(),
            KernelForm.ae(),
            KernelForm.matern32(),
            KernelForm.rq(1.0),
        ),
        bases=(Basis.legendre01(),),
        q_range=q_range,
        coeff_range=coeff_range,
        scale_range=scale_range,
        noise_fixed=noise_fixed,
    )


@dataclass(frozen=True)
class BenchmarkConfig:
    """Everything one benchmark run needs; defaults follow the study setup."""

    dataset_path: str
    target_column: str
    n_folds: int = 10
    n_trials: int = 100
    n_initial: int = 20
    n_iterations: int = 100
    seed: int = 0
    nested: bool = True
    inner_n_folds: int = 5
    global_scaling: bool = False
    space: SearchSpace = field(default_factory=benchmark_space)

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValueError("need at least 2 outer folds")
        if self.inner_n_folds < 2:
            raise ValueError("need at least 2 inner folds")
        if not 1 <= self.n_initial <= self.n_trials:
            raise ValueError("need 1 <= n_initial <= n_trials")

    def echo(self) -> dict:
        space = self.space
        return {
            "dataset_path": str(self.dataset_path),
            "target_column": self.target_column,
            "n_folds": self.n_folds,
            "n_trials": self.n_trials,
            "n_initial": self.n_initial,
            "n_iterations": self.n_iterations,
            "seed": self.seed,
            "nested": self.nested,
            "inner_n_folds": self.inner_n_folds,
            "global_scaling": self.global_scaling,
            "kernels": " ".join(f.tag for f in space.kernel_forms),
            "bases": " ".join(b.label() for b in space.bases),
            "q_range": f"{space.q_range[0]} {space.q_range[1]}",
            "r_range": (
                "fixed" if space.r_range is None
                else f"{space.r_range[0]} {space.r_range[1]}"
            ),
            "noise": (
                repr(float(space.noise_fixed))
                if space.noise_fixed is not None
                else "searched"
            ),
            "coeff_range": f"{space.coeff_range[0]!r} {space.coeff_range[1]!r}",
            "scale_range": f"{space.scale_range[0]!r} {space.scale_range[1]!r}",
        }


@dataclass(frozen=True)
class BenchmarkReport:
    """Per-fold and aggregate RMSE plus the configuration that produced it."""

    method: str
    per_fold_rmse: tuple
    mean_rmse: float
    std_rmse: float
    wall_time: float
    config_echo: dict
    best_thetas: tuple

    def __post_init__(self):
        if abs(self.mean_rmse - float(np.mean(self.per_fold_rmse))) > 1e-12:
            raise ValueError("mean_rmse must equal the mean of per_fold_rmse")


def rmse(predictions, truths) -> float:
    """Root mean squared error; inputs must be equal-length and non-empty."""
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(truths, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("rmse of empty vectors is undefined")
    if p.size != t.size:
        raise ValueError(f"length mismatch: {p.size} predictions, {t.size} truths")
    return float(np.sqrt(np.mean((p - t) ** 2)))


# ---------------------------------------------------------------------------
# benchmark driver
# ---------------------------------------------------------------------------

def _load_target(config: BenchmarkConfig) -> Dataset:
    (ds,) = load_csv(config.dataset_path, [config.target_column])
    return ds


def _fold_seeds(seed: int, n: int):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def _flush_checkpoint(path, method, config, fold_rmses, token):
    if path is None:
        return
    lines = ["format = pcegp-checkpoint-1", f"method = {method}"]
    for k, v in config.echo().items():
        lines.append(f"config.{k} = {v}")
    for i, r in enumerate(fold_rmses):
        lines.append(f"fold_{i}.rmse = {r!r}")
    lines.append(f"resume_token = {token}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def run_benchmark(
    config: BenchmarkConfig,
    dataset: Dataset | None = None,
    checkpoint_path=None,
) -> BenchmarkReport:
    """Cross-validated RMSE of the searched model under the given config.

    Nested mode reruns the hyperparameter search inside every outer fold;
    non-nested mode searches once on the full data and refits the winner
    per fold. A checkpoint file, when requested, is rewritten after every
    fold with a resumption token so interrupted runs keep partial results.
    """
    t0 = time.perf_counter()
    ds = dataset if dataset is not None else _load_target(config)
    plan = make_folds(ds.n_points, config.n_folds, config.seed)
    seeds = _fold_seeds(config.seed, config.n_folds)

    shared_best = None
    if not config.nested:
        result = run_search(
            ds,
            config.space,
            n_trials=config.n_trials,
            n_initial=config.n_initial,
            n_iterations=config.n_iterations,
            n_folds=config.inner_n_folds,
            seed=config.seed,
            global_scaling=config.global_scaling,
        )
        shared_best = result.best_theta

    fold_rmses: list = []
    best_thetas: list = []
    try:
        for f in range(config.n_folds):
            tr, te = plan.train_indices(f), plan.test_indices(f)
            train = Dataset(
                ds.inputs[tr], ds.outputs[tr], ds.column_names, ds.target_name
            )
            if config.nested:
                result = run_search(
                    train,
                    config.space,
                    n_trials=config.n_trials,
                    n_initial=config.n_initial,
                    n_iterations=config.n_iterations,
                    n_folds=config.inner_n_folds,
                    seed=seeds[f],
                    global_scaling=config.global_scaling,
                )
                best = result.best_theta
            else:
                best = shared_best

            stack, noise = config.space.build_stack(best, ds.n_inputs)
            in_sc = fit_scaler("min_max_per_column", train.inputs)
            out_sc = fit_scaler("z_normalize", train.outputs)
            model = fit_precompute(
                stack, noise, in_sc, out_sc, train.inputs, train.outputs
            )
            means, _ = predict_batch(model, ds.inputs[te])
            fold_rmses.append(rmse(means, ds.outputs[te]))
            best_thetas.append(tuple(float(v) for v in best))
            _flush_checkpoint(
                checkpoint_path, "pcegp", config, fold_rmses, f"fold_{f + 1}"
            )
    except (KeyboardInterrupt, Exception):
        _flush_checkpoint(
            checkpoint_path, "pcegp", config, fold_rmses,
            f"interrupted_at_fold_{len(fold_rmses)}",
        )
        raise

    _flush_checkpoint(checkpoint_path, "pcegp", config, fold_rmses, "complete")
    return BenchmarkReport(
        method="pcegp",
        per_fold_rmse=tuple(fold_rmses),
        mean_rmse=float(np.mean(fold_rmses)),
        std_rmse=float(np.std(fold_rmses)),
        wall_time=time.perf_counter() - t0,
        config_echo=config.echo(),
        best_thetas=tuple(best_thetas),
    )


# ---------------------------------------------------------------------------
# stationary baseline
# ---------------------------------------------------------------------------

def _ard_neg_mll_and_grad(log_params, sq_diffs, y):
    """Negative MLL and gradient for the per-dimension stationary kernel.

    `log_params` is [log l_1..log l_d, log s2, log sn2]; `sq_diffs` is the
    (d, N, N) tensor of per-dimension squared coordinate differences.
    """
    d = sq_diffs.shape[0]
    inv_l2 = np.exp(-2.0 * log_params[:d])
    s2 = np.exp(log_params[d])
    sn2 = np.exp(log_params[d + 1])

    scaled = np.tensordot(inv_l2, sq_diffs, axes=1)  # sum_d diff_d^2 / l_d^2
    k0 = s2 * np.exp(-0.5 * scaled)
    k = k0 + sn2 * np.eye(y.size)
    gram = ladder_cholesky(k, "ard squared_exponential baseline")
    alpha = cho_solve((gram.chol, True), y)
    logdet = 2.0 * float(np.sum(np.log(np.diag(gram.chol))))
    neg = 0.5 * float(y @ alpha) + 0.5 * logdet + 0.5 * y.size * np.log(2.0 * np.pi)

    a = np.outer(alpha, alpha) - cho_solve((gram.chol, True), np.eye(y.size))
    ak0 = a * k0
    grad = np.empty(d + 2)
    for j in range(d):
        grad[j] = 0.5 * float(np.sum(ak0 * sq_diffs[j])) * inv_l2[j]
    grad[d] = 0.5 * float(np.sum(ak0))
    grad[d + 1] = 0.5 * sn2 * float(np.trace(a))
    return neg, -grad, gram, alpha  # gradient of the NEGATIVE mll


def _fit_ard_baseline(x_s, y_s, n_iterations, step_size=0.05,
                      lengthscale_inits=(1.0, 0.1, 0.01)):
    """Adam from several lengthscale scales; keeps the best final likelihood.

    The marginal likelihood of a stationary kernel is multi-modal (a
    smooth-plus-noise mode competes with a wiggly low-noise mode), so a
    single start is an initialization lottery; the restarts make the
    baseline an honest stationary reference.
    """
    d = x_s.shape[1]
    diffs = x_s.T[:, :, None] - x_s.T[:, None, :]
    sq_diffs = diffs * diffs
    best = None
    for l0 in lengthscale_inits:
        log_params = np.concatenate([np.full(d, np.log(l0)), [0.0, np.log(0.1)]])
        state = AdamState.initial(d + 2, step_size=step_size)
        for _ in range(n_iterations):
            _, g, _, _ = _ard_neg_mll_and_grad(log_params, sq_diffs, y_s)
            state, log_params = adam_step(state, log_params, g)
        neg, _, gram, alpha = _ard_neg_mll_and_grad(log_params, sq_diffs, y_s)
        if best is None or neg < best[3]:
            best = (log_params, gram, alpha, neg)
    return best


def _ard_predict(log_params, x_train_s, alpha, x_query_s):
    d = x_train_s.shape[1]
    inv_l2 = np.exp(-2.0 * log_params[:d])
    s2 = np.exp(log_params[d])
    diff = x_train_s[:, None, :] - x_query_s[None, :, :]
    scaled = np.tensordot(diff * diff, inv_l2, axes=([2], [0]))
    return (s2 * np.exp(-0.5 * scaled)).T @ alpha


def run_baseline(
    config: BenchmarkConfig,
    dataset: Dataset | None = None,
    checkpoint_path=None,
) -> BenchmarkReport:
    """Cross-validated RMSE of the stationary per-dimension baseline."""
    t0 = time.perf_counter()
    ds = dataset if dataset is not None else _load_target(config)
    plan = make_folds(ds.n_points, config.n_folds, config.seed)

    fold_rmses: list = []
    best_thetas: list = []
    try:
        for f in range(config.n_folds):
            tr, te = plan.train_indices(f), plan.test_indices(f)
            in_sc = fit_scaler("min_max_per_column", ds.inputs[tr])
            out_sc = fit_scaler("z_normalize", ds.outputs[tr])
            x_s = apply_scaler(in_sc, ds.inputs[tr])
            y_s = (ds.outputs[tr] - out_sc.loc[0]) / out_sc.scale[0]

            log_params, _, alpha, _ = _fit_ard_baseline(
                x_s, y_s, config.n_iterations
            )
            xq_s = apply_scaler(in_sc, ds.inputs[te])
            mean_s = _ard_predict(log_params, x_s, alpha, xq_s)
            means = mean_s * out_sc.scale[0] + out_sc.loc[0]
            fold_rmses.append(rmse(means, ds.outputs[te]))
            best_thetas.append(tuple(float(v) for v in log_params))
            _flush_checkpoint(
                checkpoint_path, "baseline", config, fold_rmses, f"fold_{f + 1}"
            )
    except (KeyboardInterrupt, Exception):
        _flush_checkpoint(
            checkpoint_path, "baseline", config, fold_rmses,
            f"interrupted_at_fold_{len(fold_rmses)}",
        )
        raise

    _flush_checkpoint(checkpoint_path, "baseline", config, fold_rmses, "complete")
    return BenchmarkReport(
        method="baseline",
        per_fold_rmse=tuple(fold_rmses),
        mean_rmse=float(np.mean(fold_rmses)),
        std_rmse=float(np.std(fold_rmses)),
        wall_time=time.perf_counter() - t0,
        config_echo=config.echo(),
        best_thetas=tuple(best_thetas),
    )


# ---------------------------------------------------------------------------
# report rendering
# ---------------------------------------------------------------------------

def report_text(report: BenchmarkReport) -> str:
    """Machine-readable report. Deterministic: no timing information."""
    lines = [
        "format = pcegp-report-1",
        f"method = {report.method}",
    ]
    for k, v in report.config_echo.items():
        lines.append(f"config.{k} = {v}")
    for i, r in enumerate(report.per_fold_rmse):
        lines.append(f"fold_{i}.rmse = {r!r}")
    lines.append(f"mean_rmse = {report.mean_rmse!r}")
    lines.append(f"std_rmse = {report.std_rmse!r}")
    for i, theta in enumerate(report.best_thetas):
        lines.append(f"fold_{i}.theta = {' '.join(repr(v) for v in theta)}")
    return "\n".join(lines) + "\n"


def report_table(report: BenchmarkReport) -> str:
    """Human-readable summary table (includes wall time)."""
    rows = [
        f"method          {report.method}",
        f"dataset         {report.config_echo['dataset_path']} "
        f"(target {report.config_echo['target_column']})",
        f"folds           {report.config_echo['n_folds']}",
        f"seed            {report.config_echo['seed']}",
        "fold  rmse",
    ]
    for i, r in enumerate(report.per_fold_rmse):
        rows.append(f"{i:4d}  {r:.6g}")
    rows.append(f"mean  {report.mean_rmse:.6g}")
    rows.append(f"std   {report.std_rmse:.6g}")
    rows.append(f"wall  {report.wall_time:.2f} s")
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# dataset manifests
# ---------------------------------------------------------------------------

# expected shapes of the reference benchmark tables (rows exclude the header)
EXPECTED_DATASETS = {
    "boston_housing.csv": {"n_rows": 506, "n_columns": 14},
    "energy_efficiency.csv": {"n_rows": 768, "n_columns": 10},
    "concrete_compressive.csv": {"n_rows": 1030, "n_columns": 9},
}


def dataset_manifest(path) -> dict:
    """File name, sha256, and table shape for a delimited dataset file."""
    h = hashlib.sha256()
    n_rows = 0
    n_columns = None
    with open(path, "rb") as fh:
        for raw in fh:
            h.update(raw)
            line = raw.decode("utf-8").strip()
            if not line:
                continue
            if n_columns is None:
                delim = ";" if line.count(";") > line.count(",") else ","
                n_columns = len(line.split(delim))
            else:
                n_rows += 1
    return {
        "file": os.path.basename(str(path)),
        "sha256": h.hexdigest(),
        "n_rows": n_rows,
        "n_columns": n_columns or 0,
    }


def manifest_text(manifests) -> str:
    lines = ["format = pcegp-manifest-1"]
    for m in manifests:
        p = m["file"]
        lines.append(f"{p}.sha256 = {m['sha256']}")
        lines.append(f"{p}.n_rows = {m['n_rows']}")
        lines.append(f"{p}.n_columns = {m['n_columns']}")
    return "\n".join(lines) + "\n"


def verify_dataset(path, expected: dict) -> dict:
    """Check a dataset file against expected shape (and hash when given)."""
    got = dataset_manifest(path)
    for key in ("n_rows", "n_columns"):
        if key in expected and expected[key] != got[key]:
            raise ValueError(
                f"{path}: {key} is {got[key]}, expected {expected[key]}"
            )
    if "sha256" in expected and expected["sha256"] != got["sha256"]:
        raise ValueError(f"{path}: sha256 mismatch")
    return got
