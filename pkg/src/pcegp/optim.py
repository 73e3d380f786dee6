"""Two-stage hyperparameter search: TPE suggestion plus Adam refinement.

The search operates on a flat trial vector theta:

    [q, (r,) coefficient blocks, (noise coefficients,) squared scales]

where q is the shared lengthscale expansion degree, r the noise expansion
degree (present only when the noise is searched), one coefficient block of
length q_max + 1 exists per (kernel, basis) pair, and the squared output
scales close the vector. Blocks are allocated at the maximum degree so the
vector has a fixed length; entries above the sampled degree are inactive.
They are filled from the prior when suggesting and ignored when building
a model, which keeps the Parzen estimators fixed-dimensional even though
the effective dimensionality depends on the sampled degree.

Each trial is scored by k-fold cross-validation: Adam refines the active
coefficients and scales on every training split by gradient ascent on the
marginal log likelihood, and the refined model's mean negative predictive
log likelihood on the held-out split, averaged over folds, is the trial
loss. Scalers are refit per fold by default to keep the held-out points
out of every fitting step; a global-scaling flag restores the laxer
scale-once protocol for comparability.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .data import Dataset, apply_scaler, fit_scaler, make_folds
from .gp import (
    fit_precompute,
    free_parameters,
    log_predictive_density,
    mll,
    mll_gradient,
    with_free_parameters,
)
from .hyper import LengthscaleField, NoiseField
from .kernels import KernelForm, KernelStack
from .poly import Basis

FAILED_LOSS = float("inf")


# ---------------------------------------------------------------------------
# search space and the flat trial vector
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SearchSpace:
    """Bounds and structure for the trial vector.

    `noise_fixed` switches between a fixed noise variance (its value) and
    a searched noise expansion (None, with `r_range` giving the degree
    bounds). `scale_range` bounds the squared output scales, sampled
    log-uniformly.
    """

    kernel_forms: tuple
    bases: tuple
    q_range: tuple
    coeff_range: tuple = (-2.0, 2.0)
    scale_range: tuple = (1e-3, 10.0)
    r_range: tuple | None = None
    noise_fixed: float | None = 1e-4
    noise_floor: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "kernel_forms", tuple(self.kernel_forms))
        object.__setattr__(self, "bases", tuple(self.bases))
        if not self.kernel_forms:
            raise ValueError("at least one kernel form is required")
        for form in self.kernel_forms:
            if not isinstance(form, KernelForm):
                raise TypeError("kernel_forms must contain KernelForm values")
        if not self.bases:
            raise ValueError("at least one basis is required")
        for b in self.bases:
            if not isinstance(b, Basis):
                raise TypeError("bases must contain Basis values")
        q0, q1 = self.q_range
        if not (0 <= q0 <= q1 <= 16):
            raise ValueError(f"q_range must satisfy 0 <= lo <= hi <= 16, got {self.q_range}")
        if self.coeff_range[0] >= self.coeff_range[1]:
            raise ValueError("coeff_range must have lo < hi")
        if not (0.0 < self.scale_range[0] < self.scale_range[1]):
            raise ValueError("scale_range must be positive with lo < hi")
        if (self.noise_fixed is None) == (self.r_range is None):
            raise ValueError("exactly one of noise_fixed and r_range must be set")
        if self.noise_fixed is not None and self.noise_fixed <= 0.0:
            raise ValueError("fixed noise must be positive")
        if self.r_range is not None:
            r0, r1 = self.r_range
            if not (0 <= r0 <= r1 <= 16):
                raise ValueError(f"r_range must satisfy 0 <= lo <= hi <= 16, got {self.r_range}")

    @property
    def n_kernels(self) -> int:
        return len(self.kernel_forms)

    @property
    def searches_noise(self) -> bool:
        return self.r_range is not None

    # --- flat vector layout -------------------------------------------------

    @property
    def _coeff_start(self) -> int:
        return 2 if self.searches_noise else 1

    @property
    def _block_len(self) -> int:
        return self.q_range[1] + 1

    @property
    def _n_blocks(self) -> int:
        return self.n_kernels * len(self.bases)

    @property
    def _noise_start(self) -> int:
        return self._coeff_start + self._n_blocks * self._block_len

    @property
    def _noise_len(self) -> int:
        return (self.r_range[1] + 1) if self.searches_noise else 0

    @property
    def _scale_start(self) -> int:
        return self._noise_start + self._noise_len

    @property
    def n_parameters(self) -> int:
        return self._scale_start + self.n_kernels

    def degrees(self, theta) -> tuple:
        """(q, r) from a trial vector; r is None when noise is fixed."""
        q = int(round(theta[0]))
        r = int(round(theta[1])) if self.searches_noise else None
        return q, r

    def active_mask(self, theta) -> np.ndarray:
        """Which entries of theta are live for its sampled degrees."""
        q, r = self.degrees(theta)
        mask = np.zeros(self.n_parameters, dtype=bool)
        mask[0] = True
        if self.searches_noise:
            mask[1] = True
        for b in range(self._n_blocks):
            start = self._coeff_start + b * self._block_len
            mask[start : start + q + 1] = True
        if self.searches_noise:
            mask[self._noise_start : self._noise_start + r + 1] = True
        mask[self._scale_start :] = True
        return mask

    def build(self, theta):
        """Materialize (KernelStack, NoiseField) from a trial vector."""
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.n_parameters:
            raise ValueError(
                f"theta has {theta.size} entries, space needs {self.n_parameters}"
            )
        q, r = self.degrees(theta)
        q0, q1 = self.q_range
        if not q0 <= q <= q1:
            raise ValueError(f"degree {q} outside q_range {self.q_range}")

        entries = []
        block = self._coeff_start
        for k, form in enumerate(self.kernel_forms):
            terms = []
            for basis in self.bases:
                coeffs = theta[block : block + q + 1]
                block += self._block_len
                terms.append((basis, coeffs))
            scale2 = float(theta[self._scale_start + k])
            if scale2 <= 0.0:
                raise ValueError(f"squared scale must be positive, got {scale2}")
            entries.append((form, float(np.sqrt(scale2)), terms))

        if self.searches_noise:
            r0, r1 = self.r_range
            if not r0 <= r <= r1:
                raise ValueError(f"degree {r} outside r_range {self.r_range}")
            noise_terms = (
                (self.bases[0], theta[self._noise_start : self._noise_start + r + 1]),
            )
            noise = NoiseField.pce(noise_terms, floor=self.noise_floor)
        else:
            noise = NoiseField.fixed(self.noise_fixed, floor=self.noise_floor)
        return entries, noise

    def build_stack(self, theta, n_inputs: int):
        """(KernelStack, NoiseField) for data with the given input width."""
        entries, noise = self.build(theta)
        stack = KernelStack(
            tuple(
                (form, scale, LengthscaleField(tuple(terms), n_inputs))
                for form, scale, terms in entries
            )
        )
        return stack, noise

    def write_back(self, theta, stack: KernelStack, noise: NoiseField) -> np.ndarray:
        """Store refined active coefficients and scales into a theta copy."""
        theta = np.asarray(theta, dtype=float).copy()
        q, r = self.degrees(theta)
        block = self._coeff_start
        for k, (_, scale, ls_field) in enumerate(stack.entries):
            for _, coeffs in ls_field.terms:
                theta[block : block + coeffs.size] = coeffs
                block += self._block_len
            theta[self._scale_start + k] = scale * scale
        if self.searches_noise and noise.mode == "pce":
            coeffs = noise.terms[0][1]
            theta[self._noise_start : self._noise_start + coeffs.size] = coeffs
        return theta


@dataclass(frozen=True)
class TrialRecord:
    """One evaluated suggestion: the raw theta and its cross-validated loss."""

    theta: np.ndarray
    loss: float
    trial_index: int
    stage: str  # "random" or "tpe"
    fold_losses: tuple = ()
    wall_time: float = 0.0

    @property
    def failed(self) -> bool:
        return not math.isfinite(self.loss)


@dataclass(frozen=True)
class SearchResult:
    """Outcome of run_search: refined best trial plus the full history."""

    best_theta: np.ndarray
    best_loss: float
    history: list
    n_folds: int
    seed: int


# ---------------------------------------------------------------------------
# expected improvement
# ---------------------------------------------------------------------------

def expected_improvement(mu: float, sigma: float, f_best: float, xi: float) -> float:
    """EI for maximization: (mu - f_best - xi) Phi(z) + sigma phi(z)."""
    if sigma < 0.0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    gap = mu - f_best - xi
    if sigma == 0.0:
        return max(0.0, gap)
    z = gap / sigma
    return float(gap * norm.cdf(z) + sigma * norm.pdf(z))


# ---------------------------------------------------------------------------
# suggestion: random stage
# ---------------------------------------------------------------------------

def random_suggest(space: SearchSpace, rng) -> np.ndarray:
    """Uniform draw: degrees uniform, coefficients uniform, scales log-uniform."""
    theta = np.empty(space.n_parameters)
    theta[0] = rng.integers(space.q_range[0], space.q_range[1] + 1)
    if space.searches_noise:
        theta[1] = rng.integers(space.r_range[0], space.r_range[1] + 1)
    lo, hi = space.coeff_range
    theta[space._coeff_start : space._scale_start] = rng.uniform(
        lo, hi, size=space._scale_start - space._coeff_start
    )
    s_lo, s_hi = space.scale_range
    theta[space._scale_start :] = np.exp(
        rng.uniform(np.log(s_lo), np.log(s_hi), size=space.n_kernels)
    )
    return theta


# ---------------------------------------------------------------------------
# suggestion: tree-structured Parzen estimator
# ---------------------------------------------------------------------------

def _split_history(history, gamma: float):
    done = [t for t in history if not t.failed]
    if len(done) < 2:
        raise ValueError("TPE needs at least 2 completed trials")
    done.sort(key=lambda t: (t.loss, t.trial_index))
    n_good = max(1, math.ceil(gamma * len(done)))
    good = np.vstack([t.theta for t in done[:n_good]])
    bad = np.vstack([t.theta for t in done[n_good:]])
    if bad.size == 0:
        bad = good
    return good, bad


class _IntDim:
    """Discrete dimension: smoothed histogram over an integer range."""

    def __init__(self, lo, hi, good_vals, bad_vals):
        self.values = np.arange(lo, hi + 1)
        self.p_good = self._probs(good_vals)
        self.p_bad = self._probs(bad_vals)

    def _probs(self, vals):
        counts = np.array(
            [np.sum(np.rint(vals) == v) for v in self.values], dtype=float
        )
        counts += 1.0  # smoothing doubles as the prior
        return counts / counts.sum()

    def sample(self, rng):
        return float(rng.choice(self.values, p=self.p_good))

    def log_ratio(self, x):
        i = int(np.searchsorted(self.values, int(round(x))))
        return float(np.log(self.p_good[i]) - np.log(self.p_bad[i]))


class _ContDim:
    """Continuous dimension: Parzen mixture over observations plus a prior.

    One Gaussian per observation with a Scott's-rule bandwidth (floored at
    a fraction of the range), plus one wide prior component at mid-range
    with unit weight; `log_scale` does everything in log space for the
    log-uniformly sampled dimensions.
    """

    def __init__(self, lo, hi, good_vals, bad_vals, log_scale=False):
        self.log_scale = log_scale
        if log_scale:
            lo, hi = np.log(lo), np.log(hi)
            good_vals = np.log(good_vals)
            bad_vals = np.log(bad_vals)
        self.lo, self.hi = lo, hi
        self.good_mu, self.good_sd = self._components(good_vals)
        self.bad_mu, self.bad_sd = self._components(bad_vals)

    def _components(self, vals):
        width = self.hi - self.lo
        prior_mu, prior_sd = 0.5 * (self.lo + self.hi), width
        if vals.size == 0:
            return np.array([prior_mu]), np.array([prior_sd])
        sd = np.std(vals) * vals.size ** (-0.2)
        sd = max(sd, 1e-3 * width)
        mu = np.concatenate([vals, [prior_mu]])
        sds = np.full(mu.size, sd)
        sds[-1] = prior_sd
        return mu, sds

    def sample(self, rng):
        i = rng.integers(self.good_mu.size)  # components carry equal weight
        x = rng.normal(self.good_mu[i], self.good_sd[i])
        x = min(max(x, self.lo), self.hi)
        return float(np.exp(x)) if self.log_scale else float(x)

    def _log_density(self, x, mu, sd):
        return float(
            np.log(np.mean(norm.pdf(x, loc=mu, scale=sd)) + 1e-300)
        )

    def log_ratio(self, x):
        if self.log_scale:
            x = np.log(x)
        return self._log_density(x, self.good_mu, self.good_sd) - self._log_density(
            x, self.bad_mu, self.bad_sd
        )

    def sample_prior(self, rng):
        x = rng.uniform(self.lo, self.hi)
        return float(np.exp(x)) if self.log_scale else float(x)


def tpe_suggest(
    history,
    space: SearchSpace,
    gamma: float = 0.25,
    n_candidates: int = 24,
    rng=None,
) -> np.ndarray:
    """Suggest the candidate maximizing the good/bad density ratio.

    Densities are per-dimension Parzen estimators fit to the gamma-quantile
    split of the history. Candidates are drawn from the good-set densities;
    coefficient entries above a candidate's sampled degree are drawn from
    the prior and excluded from its score.
    """
    if rng is None:
        rng = np.random.default_rng()
    good, bad = _split_history(history, gamma)

    dims: dict = {0: _IntDim(*space.q_range, good[:, 0], bad[:, 0])}
    if space.searches_noise:
        dims[1] = _IntDim(*space.r_range, good[:, 1], bad[:, 1])
    lo, hi = space.coeff_range
    for m in range(space._coeff_start, space._scale_start):
        dims[m] = _ContDim(lo, hi, good[:, m], bad[:, m])
    s_lo, s_hi = space.scale_range
    for m in range(space._scale_start, space.n_parameters):
        dims[m] = _ContDim(s_lo, s_hi, good[:, m], bad[:, m], log_scale=True)

    best_theta, best_score = None, -np.inf
    for _ in range(n_candidates):
        theta = np.empty(space.n_parameters)
        theta[0] = dims[0].sample(rng)
        if space.searches_noise:
            theta[1] = dims[1].sample(rng)
        mask = space.active_mask(theta)
        for m in range(space._coeff_start, space.n_parameters):
            theta[m] = dims[m].sample(rng) if mask[m] else dims[m].sample_prior(rng)
        score = sum(
            dims[m].log_ratio(theta[m]) for m in range(space.n_parameters) if mask[m]
        )
        if score > best_score:
            best_theta, best_score = theta, score
    return best_theta


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdamState:
    """Adam moments and config; immutable, adam_step returns a new state."""

    step_size: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    first_moment: np.ndarray = field(default_factory=lambda: np.zeros(0))
    second_moment: np.ndarray = field(default_factory=lambda: np.zeros(0))
    t: int = 0

    def __post_init__(self):
        if self.step_size <= 0.0 or self.epsilon <= 0.0:
            raise ValueError("step_size and epsilon must be positive")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")

    @classmethod
    def initial(cls, n_params: int, **kwargs) -> "AdamState":
        return cls(
            first_moment=np.zeros(n_params),
            second_moment=np.zeros(n_params),
            t=0,
            **kwargs,
        )


def adam_step(state: AdamState, params, gradient):
    """One bias-corrected Adam descent step on the given loss gradient."""
    p = np.asarray(params, dtype=float)
    g = np.asarray(gradient, dtype=float)
    if p.shape != g.shape or p.shape != state.first_moment.shape:
        raise ValueError("params, gradient, and moments must share a shape")
    t = state.t + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * g
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = p - state.step_size * m_hat / (np.sqrt(v_hat) + state.epsilon)
    new_state = AdamState(
        step_size=state.step_size,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
        first_moment=m,
        second_moment=v,
        t=t,
    )
    return new_state, new_params


# ---------------------------------------------------------------------------
# fine-tuning and the search loop
# ---------------------------------------------------------------------------

def _to_adam_coords(stack, noise):
    """Free parameters with squared scales mapped to log space."""
    theta = free_parameters(stack, noise)
    n_k = stack.n_entries
    out = theta.copy()
    out[-n_k:] = np.log(theta[-n_k:])
    return out


def _from_adam_coords(stack, noise, coords):
    n_k = stack.n_entries
    flat = coords.copy()
    flat[-n_k:] = np.exp(coords[-n_k:])
    return with_free_parameters(stack, noise, flat)


def fine_tune(
    theta,
    space: SearchSpace,
    train_split,
    n_iterations: int,
    adam_config: dict | None = None,
):
    """Refine a trial's active parameters by Adam ascent on the MLL.

    `train_split` is (x_scaled, y_scaled). Degrees stay frozen; squared
    scales are optimized through their logarithm so they remain positive.
    Returns (theta_refined, final negative MLL); a factorization failure
    at any step marks the trial failed with an infinite loss.
    """
    x_s, y_s = train_split
    x_s = np.asarray(x_s, dtype=float)
    y_s = np.asarray(y_s, dtype=float).ravel()
    if x_s.shape[0] == 0:
        raise ValueError("training split is empty")
    stack, noise = space.build_stack(theta, x_s.shape[1])

    refined = np.asarray(theta, dtype=float).copy()
    try:
        if n_iterations > 0:
            coords = _to_adam_coords(stack, noise)
            state = AdamState.initial(coords.size, **(adam_config or {}))
            n_k = stack.n_entries
            for _ in range(n_iterations):
                cur_stack, cur_noise = _from_adam_coords(stack, noise, coords)
                grad = mll_gradient(cur_stack, cur_noise, x_s, y_s)
                # descend the negative MLL; chain rule for the log scales
                loss_grad = -grad
                loss_grad[-n_k:] *= np.exp(coords[-n_k:])
                if not np.all(np.isfinite(loss_grad)):
                    return np.asarray(theta, dtype=float).copy(), FAILED_LOSS
                state, coords = adam_step(state, coords, loss_grad)
            stack, noise = _from_adam_coords(stack, noise, coords)
            refined = space.write_back(theta, stack, noise)
        final_loss = -mll(stack, noise, x_s, y_s)
    except RuntimeError:
        return np.asarray(theta, dtype=float).copy(), FAILED_LOSS

    if not math.isfinite(final_loss):
        return np.asarray(theta, dtype=float).copy(), FAILED_LOSS
    return refined, final_loss


def _evaluate_trial(
    theta,
    space: SearchSpace,
    dataset: Dataset,
    plan,
    n_iterations: int,
    adam_config,
    global_scalers,
):
    """Cross-validate one suggestion; returns (mean loss, fold losses, best fold theta)."""
    fold_losses = []
    fold_thetas = []
    for f in range(plan.n_folds):
        tr, va = plan.train_indices(f), plan.test_indices(f)
        x_tr, y_tr = dataset.inputs[tr], dataset.outputs[tr]
        x_va, y_va = dataset.inputs[va], dataset.outputs[va]
        if global_scalers is not None:
            in_sc, out_sc = global_scalers
        else:
            in_sc = fit_scaler("min_max_per_column", x_tr)
            out_sc = fit_scaler("z_normalize", y_tr)

        x_tr_s = apply_scaler(in_sc, x_tr)
        y_tr_s = (y_tr - out_sc.loc[0]) / out_sc.scale[0]
        refined, train_loss = fine_tune(
            theta, space, (x_tr_s, y_tr_s), n_iterations, adam_config
        )
        if not math.isfinite(train_loss):
            return FAILED_LOSS, fold_losses + [FAILED_LOSS], None

        stack, noise = space.build_stack(refined, dataset.n_inputs)
        try:
            model = fit_precompute(stack, noise, in_sc, out_sc, x_tr, y_tr)
            lpd = log_predictive_density(model, x_va, y_va)
        except RuntimeError:
            return FAILED_LOSS, fold_losses + [FAILED_LOSS], None
        fold_losses.append(float(-np.mean(lpd)))
        fold_thetas.append(refined)

    mean_loss = float(np.mean(fold_losses))
    if not math.isfinite(mean_loss):
        return FAILED_LOSS, fold_losses, None
    best_fold = int(np.argmin(fold_losses))
    return mean_loss, fold_losses, fold_thetas[best_fold]


def run_search(
    dataset: Dataset,
    space: SearchSpace,
    n_trials: int,
    n_initial: int,
    n_iterations: int,
    n_folds: int,
    seed: int,
    adam_config: dict | None = None,
    gamma: float = 0.25,
    n_candidates: int = 24,
    global_scaling: bool = False,
) -> SearchResult:
    """Full two-stage search: random warmup, then TPE, each trial cross-validated.

    The retained best is the refined theta from the best-validating fold of
    the lowest-loss trial; the history stores the raw suggestions so the
    TPE densities stay in suggestion space.
    """
    if n_initial > n_trials:
        raise ValueError("n_initial cannot exceed n_trials")
    if n_trials < 1:
        raise ValueError("need at least one trial")

    rng = np.random.default_rng(seed)
    plan = make_folds(dataset.n_points, n_folds, seed)
    global_scalers = None
    if global_scaling:
        global_scalers = (
            fit_scaler("min_max_per_column", dataset.inputs),
            fit_scaler("z_normalize", dataset.outputs),
        )

    history: list = []
    best_theta, best_loss = None, FAILED_LOSS
    for trial in range(n_trials):
        t0 = time.perf_counter()
        if trial < n_initial:
            stage, theta = "random", random_suggest(space, rng)
        else:
            stage = "tpe"
            try:
                theta = tpe_suggest(history, space, gamma, n_candidates, rng)
            except ValueError:
                stage, theta = "random", random_suggest(space, rng)

        mean_loss, fold_losses, refined = _evaluate_trial(
            theta, space, dataset, plan, n_iterations, adam_config, global_scalers
        )
        history.append(
            TrialRecord(
                theta=theta,
                loss=mean_loss,
                trial_index=trial,
                stage=stage,
                fold_losses=tuple(fold_losses),
                wall_time=time.perf_counter() - t0,
            )
        )
        if refined is not None and mean_loss < best_loss:
            best_theta, best_loss = refined, mean_loss

    if best_theta is None:
        failures = ", ".join(f"trial {t.trial_index} ({t.stage})" for t in history)
        err = RuntimeError(f"every trial failed: {failures}")
        # callers can still persist the failed trials for post-mortem
        err.partial_result = SearchResult(
            best_theta=None, best_loss=FAILED_LOSS, history=history,
            n_folds=n_folds, seed=seed,
        )
        raise err
    return SearchResult(
        best_theta=best_theta,
        best_loss=best_loss,
        history=history,
        n_folds=n_folds,
        seed=seed,
    )


def history_to_text(result: SearchResult) -> str:
    """Persist the search history as flat structured text, one record per trial.

    A result with ``best_theta is None`` (a fully failed search flushed for
    post-mortem) omits the best lines but keeps every trial record.
    """
    lines = [
        "format = pcegp-search-1",
        f"seed = {result.seed}",
        f"n_folds = {result.n_folds}",
        f"n_trials = {len(result.history)}",
    ]
    if result.best_theta is not None:
        lines.append(f"best_loss = {result.best_loss!r}")
        lines.append(
            f"best_theta = {' '.join(repr(float(v)) for v in result.best_theta)}"
        )
    for t in result.history:
        p = f"trial_{t.trial_index}"
        lines.append(f"{p}.stage = {t.stage}")
        lines.append(f"{p}.loss = {t.loss!r}")
        lines.append(
            f"{p}.fold_losses = {' '.join(repr(float(v)) for v in t.fold_losses)}"
        )
        lines.append(f"{p}.theta = {' '.join(repr(float(v)) for v in t.theta)}")
        lines.append(f"{p}.wall_time = {t.wall_time:.6f}")
    return "\n".join(lines) + "\n"
