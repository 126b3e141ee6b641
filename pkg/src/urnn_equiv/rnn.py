"""The recurrent model: h(k) = phi(W h(k-1) + F x(k) + b), y(k) = C h(k).

Forward simulation, reverse-mode gradients of the mean-squared-error loss,
losses/metrics, contraction certificates, and similarity transforms.
Everything here is pure and deterministic; parameter and sequence values
are treated as immutable once constructed.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .activations import activate, activation_derivative, check_activation
from .errors import DegenerateOutputError, InvalidInputError, StateOverflowError

PARAM_FIELDS = ("w", "f", "b", "c", "h_init")


def _as_vector(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-d, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def _as_array2(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-d, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class RnnParams:
    """Weights (w, f, b, c), initial state and activation tag.

    h_init defaults to the zero state, which the constructions require
    and the experiments use.
    """

    w: np.ndarray  # (n, n) hidden-to-hidden
    f: np.ndarray  # (n, m) input-to-hidden
    b: np.ndarray  # (n,) bias
    c: np.ndarray  # (p, n) hidden-to-output
    h_init: Optional[np.ndarray] = None  # (n,), zeros when omitted
    activation: str = "relu"

    def __post_init__(self):
        w = _as_array2(self.w, "w")
        f = _as_array2(self.f, "f")
        b = _as_vector(self.b, "b")
        c = _as_array2(self.c, "c")
        h_init = (
            np.zeros(w.shape[0]) if self.h_init is None else _as_vector(self.h_init, "h_init")
        )
        n = w.shape[0]
        if w.shape != (n, n):
            raise InvalidInputError(f"w must be square, got {w.shape}")
        if f.shape[0] != n or b.shape[0] != n or c.shape[1] != n or h_init.shape[0] != n:
            raise InvalidInputError(
                f"inconsistent dimensions: w {w.shape}, f {f.shape}, b {b.shape}, "
                f"c {c.shape}, h_init {h_init.shape}"
            )
        check_activation(self.activation)
        for name, val in (("w", w), ("f", f), ("b", b), ("c", c), ("h_init", h_init)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def m(self) -> int:
        return self.f.shape[1]

    @property
    def p(self) -> int:
        return self.c.shape[0]

    def replace(self, **updates) -> "RnnParams":
        kwargs = {name: getattr(self, name) for name in PARAM_FIELDS}
        kwargs["activation"] = self.activation
        kwargs.update(updates)
        return RnnParams(**kwargs)


@dataclass(frozen=True)
class Sequence:
    """One trial: inputs x (T x m) and optional targets y (T x p)."""

    x: np.ndarray
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        x = _as_array2(self.x, "x")
        if x.shape[0] < 1:
            raise InvalidInputError("sequence must have at least one time step")
        object.__setattr__(self, "x", x)
        if self.y is not None:
            y = _as_array2(self.y, "y")
            if y.shape[0] != x.shape[0]:
                raise InvalidInputError(
                    f"targets cover {y.shape[0]} steps but inputs cover {x.shape[0]}"
                )
            object.__setattr__(self, "y", y)

    @property
    def t_len(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class ContractionCertificate:
    rho: float
    is_contractive: bool
    is_unitary: bool


@dataclass
class RnnGrads:
    """Gradient record, same shapes as the corresponding parameters."""

    w: np.ndarray
    f: np.ndarray
    b: np.ndarray
    c: np.ndarray
    h_init: np.ndarray

    @classmethod
    def zeros_like(cls, params: RnnParams) -> "RnnGrads":
        return cls(**{name: np.zeros_like(getattr(params, name)) for name in PARAM_FIELDS})


def certify_contraction(w) -> ContractionCertificate:
    """Spectral norm of w plus contractive / unitary flags."""
    from .linalg import spectral_norm

    a = _as_array2(w, "w")
    rho = spectral_norm(a)
    residual = np.max(np.abs(a.T @ a - np.eye(a.shape[0])))
    return ContractionCertificate(
        rho=rho, is_contractive=rho < 1.0, is_unitary=residual <= 1e-8
    )


def _check_input_dims(params: RnnParams, x: np.ndarray) -> None:
    if x.shape[1] != params.m:
        raise InvalidInputError(
            f"input dimension {x.shape[1]} does not match params (m={params.m})"
        )


def forward_batch(params: RnnParams, xs: np.ndarray):
    """Simulate a stack of sequences at once. xs: (B, T, m).

    Returns (ys (B,T,p), hs (B,T,n)). The recursion is identical to the
    per-sequence one; batching only amortizes the matrix products.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 3:
        raise InvalidInputError(f"expected (B, T, m) inputs, got shape {xs.shape}")
    batch, t_len, m = xs.shape
    if m != params.m:
        raise InvalidInputError(f"input dimension {m} does not match params (m={params.m})")
    wt = params.w.T
    ft = params.f.T
    h = np.broadcast_to(params.h_init, (batch, params.n)).copy()
    hs = np.empty((batch, t_len, params.n))
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(t_len):
            z = h @ wt + xs[:, k, :] @ ft + params.b
            h = activate(params.activation, z)
            if not np.all(np.isfinite(h)):
                raise StateOverflowError(k)
            hs[:, k, :] = h
    ys = hs @ params.c.T
    return ys, hs


def forward(params: RnnParams, seq):
    """Run the recursion on one sequence; returns (y (T,p), h_traj (T,n))."""
    x = seq.x if isinstance(seq, Sequence) else _as_array2(seq, "x")
    _check_input_dims(params, x)
    ys, hs = forward_batch(params, x[None, :, :])
    return ys[0], hs[0]


def rnn_map(params: RnnParams, seq) -> np.ndarray:
    """The sequence-to-sequence mapping: outputs only."""
    return forward(params, seq)[0]


def mse(y_pred, y_true) -> float:
    """Mean squared entry-wise error."""
    a = np.asarray(y_pred, dtype=np.float64)
    b = np.asarray(y_true, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def r_squared(y_pred, y_true) -> float:
    """1 - SSE/SST per output channel (SST around the channel mean),
    averaged over channels."""
    a = np.asarray(y_pred, dtype=np.float64)
    b = np.asarray(y_true, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 1:
        a = a[:, None]
        b = b[:, None]
    sse = np.sum((a - b) ** 2, axis=0)
    sst = np.sum((b - b.mean(axis=0)) ** 2, axis=0)
    if np.any(sst == 0.0):
        ch = int(np.nonzero(sst == 0.0)[0][0])
        raise DegenerateOutputError(f"target channel {ch} has zero variance; R^2 undefined")
    return float(np.mean(1.0 - sse / sst))


def _stack_batch(params: RnnParams, batch):
    if not batch:
        raise InvalidInputError("empty batch")
    t_len = batch[0].t_len
    for i, seq in enumerate(batch):
        if seq.y is None:
            raise InvalidInputError(f"sequence {i} has no targets")
        if seq.t_len != t_len:
            raise InvalidInputError("all sequences in a batch must share T")
        if seq.x.shape[1] != params.m or seq.y.shape[1] != params.p:
            raise InvalidInputError(f"sequence {i} dimensions do not match params")
    xs = np.stack([seq.x for seq in batch])
    ys = np.stack([seq.y for seq in batch])
    return xs, ys


def batch_loss(params: RnnParams, batch) -> float:
    """MSE averaged over batch, time and output dimension."""
    xs, ys = _stack_batch(params, batch)
    pred, _ = forward_batch(params, xs)
    return float(np.mean((pred - ys) ** 2))


def bptt_gradients(params: RnnParams, batch) -> RnnGrads:
    """Gradients of the mean-squared-error loss (mean over batch, time and
    output dimension) w.r.t. all parameters, by reverse accumulation
    through the unrolled recursion.

    The whole batch is propagated in one pass; the reduction over
    sequences is a fixed summation order, so results are deterministic.
    """
    xs, targets = _stack_batch(params, batch)
    b_sz, t_len, _ = xs.shape
    n = params.n

    wt = params.w.T
    ft = params.f.T
    h = np.broadcast_to(params.h_init, (b_sz, n)).copy()
    hs = np.empty((b_sz, t_len, n))
    deriv = np.empty((b_sz, t_len, n))
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(t_len):
            z = h @ wt + xs[:, k, :] @ ft + params.b
            h = activate(params.activation, z)
            if not np.all(np.isfinite(h)):
                raise StateOverflowError(k)
            hs[:, k, :] = h
            deriv[:, k, :] = activation_derivative(params.activation, z)
    pred = hs @ params.c.T

    d_y = (2.0 / pred.size) * (pred - targets)  # (B, T, p)
    grads = RnnGrads.zeros_like(params)
    grads.c = np.einsum("btp,btn->pn", d_y, hs)

    delta = np.zeros((b_sz, n))
    for k in range(t_len - 1, -1, -1):
        dh = d_y[:, k, :] @ params.c + delta @ params.w
        delta = deriv[:, k, :] * dh
        h_prev = hs[:, k - 1, :] if k > 0 else np.broadcast_to(params.h_init, (b_sz, n))
        grads.w += delta.T @ h_prev
        grads.f += delta.T @ xs[:, k, :]
        grads.b += delta.sum(axis=0)
    grads.h_init = (delta @ params.w).sum(axis=0)
    return grads


def similarity_transform(params: RnnParams, t) -> RnnParams:
    """Change of state coordinates (T W T^-1, T F, T b, C T^-1, T h_init)
    preserving the input-output mapping.

    Valid for identity activation with any invertible t, and for relu with
    diagonal, strictly positive t (positive scaling commutes with relu).
    """
    t = _as_array2(t, "t")
    n = params.n
    if t.shape != (n, n):
        raise InvalidInputError(f"t must be {n}x{n}, got {t.shape}")
    if params.activation == "relu":
        off_diag = t - np.diag(np.diag(t))
        if np.any(off_diag != 0.0) or np.any(np.diag(t) <= 0.0):
            raise InvalidInputError(
                "relu systems admit only diagonal transforms with positive entries"
            )
    elif params.activation != "identity":
        raise InvalidInputError(
            f"similarity transforms do not preserve {params.activation} dynamics"
        )
    sv = np.linalg.svd(t, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise InvalidInputError("t is singular")
    t_inv = np.linalg.inv(t)
    return params.replace(
        w=t @ params.w @ t_inv,
        f=t @ params.f,
        b=t @ params.b,
        c=params.c @ t_inv,
        h_init=t @ params.h_init,
    )
