"""Supervised hashing over the labeled rows.

Learns per-modality projections ``W_i`` (d_i x l) and a square label
projection ``V`` (l x l) by alternating an exact sign update of the
temporary codes ``H`` with fixed-step gradient descent on the projections.

The data-fidelity parts of both gradients are divided by the row count, so
one step size works regardless of the training-set size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import LABEL_STAGE, Hyperparameters, ProjectionSet, as_matrix, check_codes, check_same_rows, init_projections, sign
from .errors import DimensionError, DivergenceError

log = logging.getLogger(__name__)


def orthogonality_penalty(W):
    """``||W^T W - I||_F^2``; zero iff W has orthonormal columns."""
    G = W.T @ W
    G[np.diag_indices_from(G)] -= 1.0
    return float(np.sum(G * G))


def orthogonality_grad(W, gamma):
    """Gradient of ``gamma/2 * ||W^T W - I||_F^2``, i.e. ``2 gamma W (W^T W - I)``."""
    G = W.T @ W
    G[np.diag_indices_from(G)] -= 1.0
    return 2.0 * gamma * (W @ G)


def _check_dims(Xs, Ws, L, V, H=None):
    if len(Xs) != len(Ws):
        raise DimensionError(f"{len(Xs)} feature matrices for {len(Ws)} projections")
    for i, (X, W) in enumerate(zip(Xs, Ws)):
        if X.shape[1] != W.shape[0]:
            raise DimensionError(f"modality {i}: X has {X.shape[1]} columns, W has {W.shape[0]} rows")
    if L.shape[1] != V.shape[0]:
        raise DimensionError(f"L has {L.shape[1]} columns, V has {V.shape[0]} rows")
    check_same_rows(list(Xs) + [L] + ([H] if H is not None else []))
    if H is not None and H.shape[1] != V.shape[1]:
        raise DimensionError(f"H has {H.shape[1]} columns, projections produce {V.shape[1]}")


def objective_label(Xs, L, projections: ProjectionSet, H, hp: Hyperparameters, normalize=False):
    """Label-stage objective.

    ``1/2 sum_i ||H - X_i W_i||^2 + alpha/2 ||H - L V||^2
    + gamma/2 (sum_i ||W_i^T W_i - I||^2 + ||V^T V - I||^2)``.

    With ``normalize=True`` the two fidelity terms are divided by the row
    count; that is the function whose exact gradient
    :func:`grad_W_label` / :func:`grad_V_label` return.
    """
    Ws, V = projections.W, projections.V
    _check_dims(Xs, Ws, L, V, H)
    scale = 1.0 / H.shape[0] if normalize else 1.0
    data = sum(float(np.sum((H - X @ W) ** 2)) for X, W in zip(Xs, Ws))
    label = float(np.sum((H - L @ V) ** 2))
    reg = sum(orthogonality_penalty(W) for W in Ws) + orthogonality_penalty(V)
    return 0.5 * scale * data + 0.5 * hp.alpha * scale * label + 0.5 * hp.gamma * reg


def grad_W_label(X, H, W, hp: Hyperparameters):
    if X.shape[0] != H.shape[0] or X.shape[1] != W.shape[0] or W.shape[1] != H.shape[1]:
        raise DimensionError(f"shapes X{X.shape} W{W.shape} H{H.shape} are inconsistent")
    n = X.shape[0]
    return (X.T @ (X @ W - H)) / n + orthogonality_grad(W, hp.gamma)


def grad_V_label(L, H, V, hp: Hyperparameters):
    if L.shape[0] != H.shape[0] or L.shape[1] != V.shape[0] or V.shape[1] != H.shape[1]:
        raise DimensionError(f"shapes L{L.shape} V{V.shape} H{H.shape} are inconsistent")
    n = L.shape[0]
    return hp.alpha * ((L.T @ (L @ V - H)) / n) + orthogonality_grad(V, hp.gamma)


def update_H_label(Xs, Ws, L, V, hp: Hyperparameters):
    """Exact minimizer over H in {-1, +1}: ``sign(sum_i X_i W_i + alpha L V)``."""
    _check_dims(Xs, Ws, L, V)
    A = hp.alpha * (L @ V)
    for X, W in zip(Xs, Ws):
        A = A + X @ W
    return sign(A)


def relative_change(prev, cur):
    return abs(cur - prev) / max(abs(prev), 1e-12)


@dataclass(frozen=True)
class LabelStageState:
    H: np.ndarray
    projections: ProjectionSet
    trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def train_label_stage(Xs, L, hp: Hyperparameters, init: ProjectionSet = None) -> LabelStageState:
    """Alternate the H sign update with one gradient step on V and each W_i.

    Stops when the relative objective change falls below ``hp.tol`` or after
    ``hp.max_iter_hash`` iterations.  ``trace[t]`` is the objective at the end
    of iteration ``t + 1``.
    """
    Xs = [as_matrix(X, f"X_{i}") for i, X in enumerate(Xs)]
    L = as_matrix(L, "labels")
    n_labels = L.shape[1]
    if init is None:
        init = init_projections([X.shape[1] for X in Xs], n_labels, n_labels, hp.seed, LABEL_STAGE)
    Ws = [np.array(W) for W in init.W]
    V = np.array(init.V)
    _check_dims(Xs, Ws, L, V)

    trace = []
    converged = False
    it = 0
    H = None
    # overflow surfaces as a non-finite objective and a DivergenceError
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, hp.max_iter_hash + 1):
            H = update_H_label(Xs, Ws, L, V, hp)
            Hf = H.astype(np.float64)
            V = V - hp.step * grad_V_label(L, Hf, V, hp)
            Ws = [W - hp.step * grad_W_label(X, Hf, W, hp) for X, W in zip(Xs, Ws)]
            E = objective_label(Xs, L, ProjectionSet(tuple(Ws), V, LABEL_STAGE), Hf, hp)
            if not np.isfinite(E):
                raise DivergenceError("label stage", it, E)
            trace.append(E)
            if len(trace) > 1 and relative_change(trace[-2], E) < hp.tol:
                converged = True
                break
    log.debug("label stage: %d iterations, objective %.6g", it, trace[-1])
    return LabelStageState(
        H=check_codes(H),
        projections=ProjectionSet(tuple(Ws), V, LABEL_STAGE),
        trace=trace,
        iterations=it,
        converged=converged,
    )
