"""Learning harness: Adam over truncated-free BPTT gradients with an
optional transition-matrix projection (orthogonal or singular-value cap)
after every minibatch step, validation-based early stopping, and R^2
evaluation against the noise-limited ceiling.

Everything is deterministic given (init, data, config): the validation
split, the shuffles and the student initialization all derive from
config.seed through separate sub-streams.
"""

import math
import time
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import DivergenceError, InvalidInputError, StateOverflowError
from .linalg import polar_orthogonal_projection, singular_value_clip, spectral_norm
from .rnn import (
    PARAM_FIELDS,
    RnnGrads,
    RnnParams,
    Sequence,
    batch_loss,
    bptt_gradients,
    forward_batch,
    r_squared,
)
from .synth import Dataset

CONSTRAINTS = ("none", "contractive", "unitary")

_SPLIT_STREAM = 301
_SHUFFLE_STREAM = 302
_INIT_STREAM = 303


@dataclass(frozen=True)
class TrainConfig:
    hidden_units: int
    learning_rate: float = 0.01
    batch_size: int = 10
    max_epochs: int = 200
    constraint: str = "none"
    contractive_cap: float = 0.999
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 10
    validation_fraction: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.hidden_units < 1:
            raise InvalidInputError("hidden_units must be positive")
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be positive")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be at least 1")
        if self.constraint not in CONSTRAINTS:
            raise InvalidInputError(f"constraint must be one of {CONSTRAINTS}")
        if not 0.0 < self.contractive_cap < 1.0:
            raise InvalidInputError("contractive_cap must lie in (0, 1)")
        if not 0.0 < self.validation_fraction < 1.0:
            raise InvalidInputError("validation_fraction must lie in (0, 1)")
        if self.patience < 1 or self.max_epochs < 1:
            raise InvalidInputError("patience and max_epochs must be positive")


@dataclass
class AdamState:
    """Parameters plus first/second moment estimates and step counter."""

    params: RnnParams
    m: RnnGrads
    v: RnnGrads
    t: int = 0

    @classmethod
    def fresh(cls, params: RnnParams) -> "AdamState":
        return cls(params=params, m=RnnGrads.zeros_like(params), v=RnnGrads.zeros_like(params))


@dataclass
class TrainReport:
    train_losses: List[float] = field(default_factory=list)
    val_losses: List[float] = field(default_factory=list)
    test_r2: List[float] = field(default_factory=list)
    constraint_residuals: List[float] = field(default_factory=list)
    best_epoch: int = -1
    epochs_run: int = 0
    stopping_reason: str = ""
    final_constraint_residual: float = math.nan
    wall_time_s: float = 0.0
    seed: int = 0


def adam_step(state: AdamState, grads: RnnGrads, config: TrainConfig) -> AdamState:
    """One Adam update with bias correction; returns a new state."""
    t = state.t + 1
    new_params = {}
    new_m = {}
    new_v = {}
    for name in PARAM_FIELDS:
        theta = getattr(state.params, name)
        g = getattr(grads, name)
        if g.shape != theta.shape:
            raise InvalidInputError(f"gradient for {name} has shape {g.shape}, expected {theta.shape}")
        m = config.beta1 * getattr(state.m, name) + (1.0 - config.beta1) * g
        v = config.beta2 * getattr(state.v, name) + (1.0 - config.beta2) * g**2
        m_hat = m / (1.0 - config.beta1**t)
        v_hat = v / (1.0 - config.beta2**t)
        new_params[name] = theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
        new_m[name] = m
        new_v[name] = v
    return AdamState(
        params=state.params.replace(**new_params),
        m=RnnGrads(**new_m),
        v=RnnGrads(**new_v),
        t=t,
    )


def project_params(params: RnnParams, constraint: str, cap: float = 0.999) -> RnnParams:
    """Project only the transition matrix: polar factor for `unitary`,
    singular-value cap for `contractive`, identity for `none`."""
    if constraint == "none":
        return params
    if constraint == "unitary":
        return params.replace(w=polar_orthogonal_projection(params.w))
    if constraint == "contractive":
        return params.replace(w=singular_value_clip(params.w, cap))
    raise InvalidInputError(f"unknown constraint {constraint!r}")


def constraint_residual(params: RnnParams, constraint: str) -> float:
    """Orthogonality defect for `unitary`, spectral norm otherwise."""
    if constraint == "unitary":
        return float(np.max(np.abs(params.w.T @ params.w - np.eye(params.n))))
    return spectral_norm(params.w)


def init_student(
    n: int, m: int, p: int, config: TrainConfig, activation: str = "relu"
) -> RnnParams:
    """Gaussian init with std 1/sqrt(n); the transition matrix is rescaled
    to spectral norm 0.99 (a raw Gaussian draw has norm ~2, which makes an
    unconstrained relu student blow up over long horizons) and then
    projected per the active constraint."""
    rng = np.random.default_rng([config.seed, _INIT_STREAM])
    scale = 1.0 / math.sqrt(n)
    w = rng.standard_normal((n, n)) * scale
    w = w * (0.99 / spectral_norm(w))
    f = rng.standard_normal((n, m)) * scale
    c = rng.standard_normal((p, n)) * scale
    params = RnnParams(w=w, f=f, b=np.zeros(n), c=c, h_init=np.zeros(n), activation=activation)
    return project_params(params, config.constraint, config.contractive_cap)


def evaluate(params: RnnParams, test: List[Sequence]) -> float:
    """Channel-averaged R^2 over the concatenated test set."""
    if not test:
        raise InvalidInputError("empty test set")
    preds = []
    targets = []
    for seq in test:
        if seq.y is None:
            raise InvalidInputError("test sequences must carry targets")
        ys, _ = forward_batch(params, seq.x[None])
        preds.append(ys[0])
        targets.append(seq.y)
    return r_squared(np.vstack(preds), np.vstack(targets))


def oracle_optimal_r2(dataset: Dataset) -> float:
    """Noise-floor-limited R^2 ceiling: 1 - noise_variance / target
    variance, per channel, averaged over channels, on the test targets."""
    noise_var = dataset.metadata["noise_variance"]
    if noise_var == 0.0:
        return 1.0
    targets = np.vstack([seq.y for seq in dataset.test])
    variances = targets.var(axis=0)
    return float(np.mean(1.0 - noise_var / variances))


def _split_validation(n_sequences: int, fraction: float, seed: int):
    rng = np.random.default_rng([seed, _SPLIT_STREAM])
    perm = rng.permutation(n_sequences)
    n_val = max(1, int(round(fraction * n_sequences)))
    if n_val >= n_sequences:
        raise InvalidInputError(
            f"validation split leaves no training data ({n_val} of {n_sequences})"
        )
    return perm[n_val:], perm[:n_val]


def train(init: RnnParams, data: Dataset, config: TrainConfig) -> Tuple[RnnParams, TrainReport]:
    """Minibatch Adam with per-step projection and validation-based early
    stopping; returns the best-validation parameters and the full report."""
    if config.hidden_units != init.n:
        raise InvalidInputError(
            f"config.hidden_units = {config.hidden_units} but init has {init.n} states"
        )
    if not data.train:
        raise InvalidInputError("dataset has no training sequences")
    first = data.train[0]
    if first.x.shape[1] != init.m or (first.y is not None and first.y.shape[1] != init.p):
        raise InvalidInputError("init dimensions do not match the dataset")

    t_start = time.perf_counter()
    train_idx, val_idx = _split_validation(
        len(data.train), config.validation_fraction, config.seed
    )
    train_split = [data.train[i] for i in train_idx]
    val_split = [data.train[i] for i in val_idx]

    state = AdamState.fresh(init)
    report = TrainReport(seed=config.seed)
    shuffle_rng = np.random.default_rng([config.seed, _SHUFFLE_STREAM])

    best_val = math.inf
    best_params = init
    epochs_since_best = 0

    for epoch in range(config.max_epochs):
        order = shuffle_rng.permutation(len(train_split))
        try:
            for start in range(0, len(order), config.batch_size):
                batch = [train_split[i] for i in order[start : start + config.batch_size]]
                grads = bptt_gradients(state.params, batch)
                state = adam_step(state, grads, config)
                state.params = project_params(
                    state.params, config.constraint, config.contractive_cap
                )
            train_loss = batch_loss(state.params, train_split)
            val_loss = batch_loss(state.params, val_split)
            test_score = evaluate(state.params, data.test) if data.test else math.nan
        except StateOverflowError as exc:
            raise DivergenceError(epoch, str(exc)) from exc
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise DivergenceError(epoch, f"loss train={train_loss} val={val_loss}")

        report.train_losses.append(train_loss)
        report.val_losses.append(val_loss)
        report.test_r2.append(test_score)
        report.constraint_residuals.append(
            constraint_residual(state.params, config.constraint)
        )
        report.epochs_run = epoch + 1

        if val_loss < best_val:
            best_val = val_loss
            best_params = state.params
            report.best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= config.patience:
                report.stopping_reason = "early_stop"
                break
    if not report.stopping_reason:
        report.stopping_reason = "max_epochs"

    report.final_constraint_residual = constraint_residual(best_params, config.constraint)
    report.wall_time_s = time.perf_counter() - t_start
    return best_params, report
