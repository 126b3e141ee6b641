"""Input-output equivalence machinery.

Three pillars:

* ``unitary_embedding`` rewrites any contractive relu network with n states
  as an orthogonal-transition network with 2n states whose outputs are
  identical for every input sequence bounded by ||x(k)||_2 <= M. The extra
  block of states is pinned at zero by a large negative bias, and the
  orthogonal transition is assembled from the original W stacked over the
  symmetric square root of I - W^T W, completed to a full basis.
* ``one_state_urnn_gap`` demonstrates the lower bound: no 1-state
  orthogonal network can reproduce the canonical scalar witness, certified
  by exhaustive grid search over (w, f, b, c).
* ``sigmoid_mismatch_witness`` demonstrates that for sigmoid dynamics the
  rewrite is impossible outright: the linearization around constant-input
  fixed points exposes (eigenvalue, steady output) pairs that no unitary
  candidate can match on a neighborhood.
"""

import hashlib
from dataclasses import dataclass
from typing import List, Optional, Sequence as SequenceType

import numpy as np

from .activations import activation_derivative
from .errors import InvalidInputError, UnsupportedActivationError
from .linalg import orthonormal_complete, spectral_norm, symmetric_psd_sqrt
from .linsys import ctrb_obsv, fixed_point, linearize
from .rnn import RnnParams, certify_contraction, rnn_map


@dataclass(frozen=True)
class EmbeddingRecord:
    """The constructed 2n-state unitary network plus its certificate."""

    urnn: RnnParams
    source_hash: str
    rho: float
    input_bound: float
    state_bound: float  # (||F|| M + ||b||_2) / (1 - rho)


@dataclass(frozen=True)
class EquivalenceReport:
    trials: int
    max_abs_deviation: float
    per_trial_deviations: List[float]
    edge_deviations: List[float]
    passed: bool
    tolerance: float
    seed: int


@dataclass(frozen=True)
class MismatchReport:
    """Per-probe (eigenvalue, steady-output) pairs for the contractive
    reference and a unitary candidate, restricted to probes where the
    candidate's linearization is controllable and observable."""

    x_grid: List[float]
    reference_values: List[np.ndarray]
    candidate_values: List[np.ndarray]
    admissible: List[bool]
    max_gap: Optional[float]  # None when no probe is admissible


def params_digest(params: RnnParams) -> str:
    """Deterministic sha256 over dimensions, activation and raw weights."""
    h = hashlib.sha256()
    h.update(f"{params.n},{params.m},{params.p},{params.activation}".encode())
    for name in ("w", "f", "b", "c", "h_init"):
        h.update(np.ascontiguousarray(getattr(params, name)).tobytes())
    return h.hexdigest()


def unitary_embedding(source: RnnParams, input_bound_m: float) -> EmbeddingRecord:
    """Construct the 2n-state unitary network matching `source` on all
    inputs with ||x(k)||_2 <= input_bound_m.

    Requires a relu source with zero initial state and ||W|| strictly
    below 1. The first n states of the result track the source states;
    states n+1..2n stay at zero because their bias is the negated state
    bound, which no reachable pre-activation can overcome.
    """
    if source.activation != "relu":
        raise UnsupportedActivationError(
            f"embedding is defined for relu sources, got {source.activation!r}"
        )
    if np.any(source.h_init != 0.0):
        raise InvalidInputError("embedding requires a zero initial state")
    if not input_bound_m > 0:
        raise InvalidInputError(f"input bound must be positive, got {input_bound_m}")
    n = source.n
    rho = spectral_norm(source.w)
    if rho >= 1.0 - 1e-9:
        raise InvalidInputError(f"source is not contractive: ||W|| = {rho:.12g}")

    state_bound = (spectral_norm(source.f) * input_bound_m + np.linalg.norm(source.b)) / (
        1.0 - rho
    )

    gram_defect = np.eye(n) - source.w.T @ source.w
    gram_defect = 0.5 * (gram_defect + gram_defect.T)
    w3 = symmetric_psd_sqrt(gram_defect)
    first_cols = np.vstack([source.w, w3])  # 2n x n, orthonormal columns
    completion = orthonormal_complete(first_cols)
    w_u = np.hstack([first_cols, completion])

    urnn = RnnParams(
        w=w_u,
        f=np.vstack([source.f, np.zeros((n, source.m))]),
        b=np.concatenate([source.b, -state_bound * np.ones(n)]),
        c=np.hstack([source.c, np.zeros((source.p, n))]),
        h_init=np.zeros(2 * n),
        activation="relu",
    )
    return EmbeddingRecord(
        urnn=urnn,
        source_hash=params_digest(source),
        rho=rho,
        input_bound=float(input_bound_m),
        state_bound=float(state_bound),
    )


def sample_ball_sequence(t_len: int, m: int, radius: float, seed) -> np.ndarray:
    """(t_len, m) inputs with each row drawn uniformly from the l2 ball."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((t_len, m))
    u = rng.random(t_len)
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0.0] = 1.0
    scale = radius * u ** (1.0 / m) / norms
    return g * scale[:, None]


def edge_probe_inputs(t_len: int, m: int, radius: float) -> List[np.ndarray]:
    """Deterministic corner cases: zeros, +/- constant on the first input
    channel, and a single impulse at k = 0."""
    zeros = np.zeros((t_len, m))
    const = np.zeros((t_len, m))
    const[:, 0] = radius
    impulse = np.zeros((t_len, m))
    impulse[0, 0] = radius
    return [zeros, const, -const, impulse]


def max_output_deviation(a: RnnParams, b: RnnParams, inputs: SequenceType[np.ndarray]) -> float:
    """Largest entry-wise output gap between two systems over a probe set."""
    dev = 0.0
    for x in inputs:
        dev = max(dev, float(np.max(np.abs(rnn_map(a, x) - rnn_map(b, x)))))
    return dev


def verify_equivalence(
    a: RnnParams,
    b: RnnParams,
    input_bound_m: float,
    trials: int,
    t_len: int,
    tol: float,
    seed: int,
) -> EquivalenceReport:
    """Monte-Carlo check that two systems produce the same outputs on
    inputs bounded by input_bound_m.

    `trials` random sequences (rows uniform in the l2 ball of radius M,
    per-trial generators seeded from (seed, trial index)) plus fixed edge
    probes. Deterministic given `seed`.
    """
    if a.m != b.m or a.p != b.p:
        raise InvalidInputError(
            f"systems are not comparable: ({a.m} -> {a.p}) vs ({b.m} -> {b.p})"
        )
    if trials < 0 or t_len < 1:
        raise InvalidInputError("need trials >= 0 and t_len >= 1")
    edge_devs = [
        float(np.max(np.abs(rnn_map(a, x) - rnn_map(b, x))))
        for x in edge_probe_inputs(t_len, a.m, input_bound_m)
    ]
    trial_devs = []
    for trial in range(trials):
        x = sample_ball_sequence(t_len, a.m, input_bound_m, seed=[seed, trial])
        trial_devs.append(float(np.max(np.abs(rnn_map(a, x) - rnn_map(b, x)))))
    max_dev = max(edge_devs + trial_devs)
    return EquivalenceReport(
        trials=trials,
        max_abs_deviation=max_dev,
        per_trial_deviations=trial_devs,
        edge_deviations=edge_devs,
        passed=max_dev <= tol,
        tolerance=float(tol),
        seed=int(seed),
    )


def dof_count(n: int, m: int, p: int, kind: str) -> int:
    """Degrees of freedom: a general n-state network modulo positive
    diagonal rescaling, or a unitary network with 2n states."""
    if n < 1 or m < 0 or p < 0:
        raise InvalidInputError(f"invalid dimensions n={n}, m={m}, p={p}")
    if kind == "rnn":
        return n * n + (p + m) * n
    if kind == "urnn_double":
        return n * (2 * n - 1) + 2 * n * (p + m)
    raise InvalidInputError(f"kind must be 'rnn' or 'urnn_double', got {kind!r}")


def converse_relu_witness(n: int, w_c: float) -> RnnParams:
    """The separable relu system (W = w_c I, F = I, b = 0, C = I) whose
    unitary rewrites all need 2n states."""
    if not 0.0 < w_c < 1.0:
        raise InvalidInputError(f"w_c must lie in (0, 1), got {w_c}")
    if n < 1:
        raise InvalidInputError(f"n must be positive, got {n}")
    eye = np.eye(n)
    return RnnParams(
        w=w_c * eye,
        f=eye.copy(),
        b=np.zeros(n),
        c=eye.copy(),
        h_init=np.zeros(n),
        activation="relu",
    )


SCALAR_PROBE_BOUND = 10.0
SCALAR_PROBE_T = 64
_SCALAR_PROBE_SEED = 20231


def scalar_probe_inputs(
    input_bound: float = SCALAR_PROBE_BOUND,
    t_len: int = SCALAR_PROBE_T,
    n_random: int = 3,
    seed: int = _SCALAR_PROBE_SEED,
) -> List[np.ndarray]:
    """Fixed probe set for the scalar lower-bound search: constants that
    hold the witness in its always-active regime, an impulse, and seeded
    bounded random sequences."""
    probes = []
    for level in (1.0, 0.4, 0.1, -0.4):
        probes.append(np.full((t_len, 1), level * input_bound))
    impulse = np.zeros((t_len, 1))
    impulse[0, 0] = input_bound
    probes.append(impulse)
    for i in range(n_random):
        rng = np.random.default_rng([seed, i])
        probes.append(rng.uniform(-input_bound, input_bound, size=(t_len, 1)))
    return probes


def one_state_urnn_gap(
    witness: RnnParams,
    grid_resolution: int,
    probes: Optional[List[np.ndarray]] = None,
) -> float:
    """Exhaustive search over 1-state unitary networks (w in {+1, -1};
    f, b, c on a [-3, 3] grid): the smallest worst-case output deviation
    from the scalar witness over the fixed probe set.

    A strictly positive return is a sampling certificate that no 1-state
    unitary network reproduces the witness.
    """
    if witness.n != 1 or witness.m != 1 or witness.p != 1:
        raise InvalidInputError("witness must be the scalar (n=1) system")
    if witness.activation != "relu":
        raise InvalidInputError("witness must use relu activation")
    if grid_resolution < 2:
        raise InvalidInputError("grid_resolution must be at least 2")
    if probes is None:
        probes = scalar_probe_inputs()

    grid = np.linspace(-3.0, 3.0, grid_resolution)
    w_vals = np.array([1.0, -1.0])
    f_axis = grid[None, :, None]
    b_axis = grid[None, None, :]
    w_axis = w_vals[:, None, None]
    c_axis = grid[None, None, None, :]

    # dev[w, f, b, c] accumulates the max output deviation over probes/steps.
    dev = np.zeros((2, grid_resolution, grid_resolution, grid_resolution))
    for x in probes:
        y_ref = rnn_map(witness, x)[:, 0]
        h = np.zeros((2, grid_resolution, grid_resolution))
        for k in range(x.shape[0]):
            h = np.maximum(w_axis * h + f_axis * x[k, 0] + b_axis, 0.0)
            np.maximum(dev, np.abs(h[..., None] * c_axis - y_ref[k]), out=dev)
    return float(dev.min())


def sample_scalar_unitary_sigmoid_candidates(count: int, seed: int) -> List[RnnParams]:
    """Seeded scalar sigmoid candidates with w in {+1, -1} and Gaussian
    (f, b, c)."""
    rng = np.random.default_rng(seed)
    candidates = []
    for _ in range(count):
        w = rng.choice([1.0, -1.0])
        f, b, c = rng.standard_normal(3)
        candidates.append(
            RnnParams(
                w=np.array([[w]]),
                f=np.array([[f]]),
                b=np.array([b]),
                c=np.array([[c]]),
                h_init=np.zeros(1),
                activation="sigmoid",
            )
        )
    return candidates


DEFAULT_MISMATCH_GRID = (-1.0, -0.5, 0.0, 0.5, 1.0)


def sigmoid_mismatch_witness(
    w_c: float,
    candidate: RnnParams,
    x_grid: SequenceType[float] = DEFAULT_MISMATCH_GRID,
) -> MismatchReport:
    """Compare the scalar contractive sigmoid reference (w_c, f=1, b=0,
    c=1) with a unitary sigmoid candidate through the linearizations at
    constant-input fixed points.

    At each probe x*, both systems contribute a pair (product of
    linearized transition eigenvalues, steady output). Probes where the
    candidate's linearization is uncontrollable or unobservable carry no
    information and are excluded from the reported gap.
    """
    if not 0.0 < w_c < 1.0:
        raise InvalidInputError(f"w_c must lie in (0, 1), got {w_c}")
    if candidate.activation != "sigmoid":
        raise UnsupportedActivationError("candidate must use sigmoid activation")
    if candidate.m != 1 or candidate.p != 1:
        raise InvalidInputError("candidate must have scalar input and output")
    if not certify_contraction(candidate.w).is_unitary:
        raise InvalidInputError("candidate transition matrix is not unitary")

    reference = RnnParams(
        w=np.array([[w_c]]),
        f=np.array([[1.0]]),
        b=np.zeros(1),
        c=np.array([[1.0]]),
        h_init=np.zeros(1),
        activation="sigmoid",
    )

    ref_vals = []
    cand_vals = []
    admissible = []
    for x_star in x_grid:
        x_vec = np.array([float(x_star)])
        h_c = fixed_point(reference, x_vec)
        z_c = w_c * h_c[0] + x_star
        ref_vals.append(
            np.array([w_c * float(activation_derivative("sigmoid", np.array([z_c]))[0]), h_c[0]])
        )
        lin = linearize(candidate, x_vec)
        controllable, observable = ctrb_obsv(lin)
        admissible.append(controllable and observable)
        cand_vals.append(np.array([float(np.linalg.det(lin.a)), float(lin.y_star[0])]))

    gaps = [
        float(np.max(np.abs(r - c)))
        for r, c, ok in zip(ref_vals, cand_vals, admissible)
        if ok
    ]
    return MismatchReport(
        x_grid=[float(x) for x in x_grid],
        reference_values=ref_vals,
        candidate_values=cand_vals,
        admissible=admissible,
        max_gap=max(gaps) if gaps else None,
    )
