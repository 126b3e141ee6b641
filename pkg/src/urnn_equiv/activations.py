"""Pointwise activations and their derivatives.

All three activations are non-expansive in l2; the Lipschitz constants
below are what the fixed-point solver's contraction test uses.
"""

import numpy as np

from .errors import InvalidInputError

ACTIVATIONS = ("relu", "sigmoid", "identity")

# max |phi'| : relu/identity 1, sigmoid 1/4
LIPSCHITZ = {"relu": 1.0, "sigmoid": 0.25, "identity": 1.0}


def check_activation(tag: str) -> str:
    if tag not in ACTIVATIONS:
        raise InvalidInputError(f"unknown activation {tag!r}; expected one of {ACTIVATIONS}")
    return tag


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split on sign to avoid overflow in exp for large |z|.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def activate(tag: str, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "sigmoid":
        return _sigmoid(z)
    if tag == "identity":
        return z.copy()
    raise InvalidInputError(f"unknown activation {tag!r}")


def activation_derivative(tag: str, z: np.ndarray) -> np.ndarray:
    """phi'(z) elementwise; the relu subgradient at 0 is taken to be 0."""
    z = np.asarray(z, dtype=np.float64)
    if tag == "relu":
        return (z > 0).astype(np.float64)
    if tag == "sigmoid":
        s = _sigmoid(z)
        return s * (1.0 - s)
    if tag == "identity":
        return np.ones_like(z)
    raise InvalidInputError(f"unknown activation {tag!r}")
