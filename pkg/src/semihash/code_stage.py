"""Supervised hashing over all training rows, producing the unified codes.

Labeled rows are fitted against their ground-truth labels and unlabeled rows
against the estimated labels, with weights ``beta_l`` and ``beta_u`` on the two
groups.  Each group's fidelity gradient is divided by its own row count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import CODE_STAGE, Hyperparameters, ProjectionSet, TrainedModel, as_matrix, check_codes, check_same_rows, init_projections, sign
from .errors import DimensionError, DivergenceError
from .label_stage import orthogonality_grad, orthogonality_penalty, relative_change

log = logging.getLogger(__name__)


def _check_group(Xs, Ws, L, V, B=None, name=""):
    if len(Xs) != len(Ws):
        raise DimensionError(f"{len(Xs)} {name} feature matrices for {len(Ws)} projections")
    for i, (X, W) in enumerate(zip(Xs, Ws)):
        if X.ndim != 2 or X.shape[1] != W.shape[0]:
            raise DimensionError(f"{name} modality {i}: X{X.shape} does not match W{W.shape}")
    if L.shape[1] != V.shape[0]:
        raise DimensionError(f"{name} labels have {L.shape[1]} columns, V has {V.shape[0]} rows")
    mats = list(Xs) + [L]
    if B is not None:
        if B.shape[1] != V.shape[1]:
            raise DimensionError(f"{name} codes have {B.shape[1]} bits, projections produce {V.shape[1]}")
        mats.append(B)
    check_same_rows(mats)


def _fidelity(Xs, Ws, L, V, B, alpha):
    data = sum(float(np.sum((B - X @ W) ** 2)) for X, W in zip(Xs, Ws))
    label = float(np.sum((B - L @ V) ** 2))
    return 0.5 * data + 0.5 * alpha * label


def objective_code(X_l, X_u, L_l, L_u, projections: ProjectionSet, B_l, B_u, hp: Hyperparameters, normalize=False):
    """Code-stage objective.

    ``beta_l * F(X^l, L^l, B^l) + beta_u * F(X^u, L^u, B^u) + gamma/2 * reg``
    with ``F = 1/2 sum_i ||B - X_i W_i||^2 + alpha/2 ||B - L V||^2``.
    ``normalize=True`` divides each group's F by its row count (the function
    the gradients below differentiate).  ``hp`` must carry resolved betas.
    """
    Ws, V = projections.W, projections.V
    _check_group(X_l, Ws, L_l, V, B_l, "labeled")
    _check_group(X_u, Ws, L_u, V, B_u, "unlabeled")
    n_l, n_u = B_l.shape[0], B_u.shape[0]
    total = 0.0
    if n_l:
        s = 1.0 / n_l if normalize else 1.0
        total += hp.beta_l * (s * _fidelity(X_l, Ws, L_l, V, B_l, hp.alpha))
    if n_u:
        s = 1.0 / n_u if normalize else 1.0
        total += hp.beta_u * (s * _fidelity(X_u, Ws, L_u, V, B_u, hp.alpha))
    reg = sum(orthogonality_penalty(W) for W in Ws) + orthogonality_penalty(V)
    return total + 0.5 * hp.gamma * reg


def grad_W_code(X_l, X_u, B_l, B_u, W, hp: Hyperparameters):
    G = orthogonality_grad(W, hp.gamma)
    if X_l.shape[0]:
        G = hp.beta_l * ((X_l.T @ (X_l @ W - B_l)) / X_l.shape[0]) + G
    if X_u.shape[0]:
        G = G + hp.beta_u * ((X_u.T @ (X_u @ W - B_u)) / X_u.shape[0])
    return G


def grad_V_code(L_l, L_u, B_l, B_u, V, hp: Hyperparameters):
    G = orthogonality_grad(V, hp.gamma)
    if L_l.shape[0]:
        G = hp.alpha * hp.beta_l * ((L_l.T @ (L_l @ V - B_l)) / L_l.shape[0]) + G
    if L_u.shape[0]:
        G = G + hp.alpha * hp.beta_u * ((L_u.T @ (L_u @ V - B_u)) / L_u.shape[0])
    return G


def _sign_update(Xs, Ws, L, V, alpha):
    A = alpha * (L @ V)
    for X, W in zip(Xs, Ws):
        A = A + X @ W
    return sign(A)


def update_B(X_l, X_u, Ws, L_l, L_u, V, hp: Hyperparameters):
    """Exact minimizers ``B^l = sign(sum X^l W + alpha L^l V)`` and likewise for B^u."""
    _check_group(X_l, Ws, L_l, V, name="labeled")
    _check_group(X_u, Ws, L_u, V, name="unlabeled")
    return _sign_update(X_l, Ws, L_l, V, hp.alpha), _sign_update(X_u, Ws, L_u, V, hp.alpha)


@dataclass(frozen=True)
class CodeStageState:
    B_l: np.ndarray
    B_u: np.ndarray
    projections: ProjectionSet
    hyperparameters: Hyperparameters
    trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    model: TrainedModel = None

    @property
    def B(self):
        return np.vstack([self.B_l, self.B_u])


def train_code_stage(X_l, X_u, L_l, L_u, hp: Hyperparameters, code_length, means=None, init: ProjectionSet = None) -> CodeStageState:
    """Learn code-stage projections and the unified codes ``B = [B^l; B^u]``.

    Unset betas are resolved from the group sizes.  ``means`` are the
    per-modality centering vectors stored in the resulting model (zeros when
    omitted).
    """
    X_l = [as_matrix(X, f"X_l[{i}]", allow_empty=True) for i, X in enumerate(X_l)]
    X_u = [as_matrix(X, f"X_u[{i}]", allow_empty=True) for i, X in enumerate(X_u)]
    L_l = as_matrix(L_l, "L_l", allow_empty=True)
    n_labels = L_l.shape[1]
    L_u = as_matrix(L_u, "L_u", allow_empty=True) if L_u is not None else np.zeros((0, n_labels))
    if not X_u:
        X_u = [np.zeros((0, X.shape[1])) for X in X_l]
    if X_l[0].shape[0] + X_u[0].shape[0] == 0:
        raise DimensionError("no training rows")
    hp = hp.resolve_betas(L_l.shape[0], L_u.shape[0])
    dims = [X.shape[1] for X in X_l]
    if init is None:
        init = init_projections(dims, n_labels, code_length, hp.seed, CODE_STAGE)
    Ws = [np.array(W) for W in init.W]
    V = np.array(init.V)

    trace = []
    converged = False
    it = 0
    B_l = B_u = None
    # overflow surfaces as a non-finite objective and a DivergenceError
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, hp.max_iter_hash + 1):
            B_l, B_u = update_B(X_l, X_u, Ws, L_l, L_u, V, hp)
            Bl, Bu = B_l.astype(np.float64), B_u.astype(np.float64)
            V = V - hp.step * grad_V_code(L_l, L_u, Bl, Bu, V, hp)
            Ws = [W - hp.step * grad_W_code(Xl, Xu, Bl, Bu, W, hp) for Xl, Xu, W in zip(X_l, X_u, Ws)]
            E = objective_code(X_l, X_u, L_l, L_u, ProjectionSet(tuple(Ws), V, CODE_STAGE), Bl, Bu, hp)
            if not np.isfinite(E):
                raise DivergenceError("code stage", it, E)
            trace.append(E)
            if len(trace) > 1 and relative_change(trace[-2], E) < hp.tol:
                converged = True
                break
    log.debug("code stage: %d iterations, objective %.6g", it, trace[-1])

    proj = ProjectionSet(tuple(Ws), V, CODE_STAGE)
    if means is None:
        means = [np.zeros(d) for d in dims]
    B = np.vstack([B_l, B_u])
    model = TrainedModel(projections=proj, means=tuple(means), codes=B, hyperparameters=hp)
    return CodeStageState(
        B_l=check_codes(B_l), B_u=check_codes(B_u), projections=proj, hyperparameters=hp,
        trace=trace, iterations=it, converged=converged, model=model,
    )


def encode_out_of_sample(X_query, modality, model: TrainedModel, centered=False):
    """Codes ``sign((X - mean_i) W_i)`` for raw query features of one modality.

    Pass ``centered=True`` when ``X_query`` is already centered with the
    model's stored means.
    """
    if not 0 <= modality < model.n_modalities:
        raise DimensionError(f"modality index {modality} out of range 0..{model.n_modalities - 1}")
    X = as_matrix(X_query, "query features", allow_empty=True)
    W = model.projections.W[modality]
    if X.shape[1] != W.shape[0]:
        raise DimensionError(f"query has {X.shape[1]} features, modality {modality} expects {W.shape[0]}")
    if not centered:
        X = X - model.means[modality]
    return sign(X @ W)
