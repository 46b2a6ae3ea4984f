"""Fuzzy label estimation for the unlabeled rows.

Each modality proposes candidate codes ``H_i = sign(X_i W_i)``.  A real label
matrix ``L`` is sought such that ``L V`` matches the candidates, with
per-row memberships ``p_i(r)`` on the probability simplex deciding how much
each modality is trusted.  Memberships and labels are updated alternately,
each in closed form, in the manner of fuzzy c-means.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import ProjectionSet, as_matrix, check_same_rows, sign
from .errors import DimensionError, ParameterError, SingularityError

log = logging.getLogger(__name__)

ZERO_DISTANCE = 1e-12
MAX_CONDITION = 1e12
# above this condition number the "pinv" policy treats V as rank-deficient
PINV_MAX_CONDITION = 1e2


@dataclass(frozen=True, eq=False)
class MembershipState:
    """Memberships as a (K, n_u) array; column r lies on the simplex."""

    p: np.ndarray
    m: float = 2.0

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64)
        if p.ndim != 2:
            raise DimensionError(f"memberships must be (K, n), got {p.shape}")
        if not self.m > 1:
            raise ParameterError(f"fuzzifier m must be > 1, got {self.m}")
        if np.any(p < 0) or np.any(p > 1) or not np.allclose(p.sum(axis=0), 1.0, rtol=0, atol=1e-9):
            raise ParameterError("memberships must be non-negative and sum to 1 per row")
        p.flags.writeable = False
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, K, n, m=2.0):
        return cls(np.full((K, n), 1.0 / K), m)

    @property
    def weights(self):
        """``p_i(r) ** m``, the diagonal of P_i^m."""
        return self.p ** self.m


def candidate_codes(Xs, Ws):
    """Per-modality candidate codes ``sign(X_i W_i)``."""
    if len(Xs) != len(Ws):
        raise DimensionError(f"{len(Xs)} feature matrices for {len(Ws)} projections")
    out = []
    for i, (X, W) in enumerate(zip(Xs, Ws)):
        X = as_matrix(X, f"X_{i}", allow_empty=True)
        if X.shape[1] != W.shape[0]:
            raise DimensionError(f"modality {i}: X has {X.shape[1]} columns, W has {W.shape[0]} rows")
        out.append(sign(X @ W))
    check_same_rows(out)
    return out


def _check(L, V, Hs):
    if L.shape[1] != V.shape[0]:
        raise DimensionError(f"L has {L.shape[1]} columns, V has {V.shape[0]} rows")
    for i, H in enumerate(Hs):
        if H.shape != (L.shape[0], V.shape[1]):
            raise DimensionError(f"candidate {i} has shape {H.shape}, expected {(L.shape[0], V.shape[1])}")


def distances(L, V, Hs):
    """(K, n) array of squared row distances ``||L(r,:) V - H_i(r,:)||^2``."""
    _check(L, V, Hs)
    LV = L @ V
    return np.stack([np.sum((LV - H) ** 2, axis=1) for H in Hs])


def fuzzy_objective(L, V, Hs, memberships: MembershipState):
    """``sum_i sum_r p_i(r)^m ||L(r,:) V - H_i(r,:)||^2``."""
    D = distances(L, V, Hs)
    if memberships.p.shape != D.shape:
        raise DimensionError(f"memberships {memberships.p.shape} vs distances {D.shape}")
    return float(np.sum(memberships.weights * D))


def memberships_from_distances(D, m):
    """Closed-form membership update for a (K, n) distance array.

    ``p_i(r) = 1 / sum_k (d_i(r) / d_k(r)) ** (1 / (m - 1))``.  Rows with a
    distance at or below ``ZERO_DISTANCE`` split their mass evenly over the
    zero-distance modalities.
    """
    if not m > 1:
        raise ParameterError(f"fuzzifier m must be > 1, got {m}")
    D = np.asarray(D, dtype=np.float64)
    K, n = D.shape
    P = np.empty_like(D)
    zero = D <= ZERO_DISTANCE
    singular = zero.any(axis=0)
    if singular.any():
        Z = zero[:, singular].astype(np.float64)
        P[:, singular] = Z / Z.sum(axis=0)
    regular = ~singular
    if regular.any():
        Dr = D[:, regular]
        expo = 1.0 / (m - 1.0)
        # ratios[i, k, r] = (d_i / d_k) ** expo
        ratios = (Dr[:, None, :] / Dr[None, :, :]) ** expo
        P[:, regular] = 1.0 / ratios.sum(axis=1)
    return P


def update_memberships(L, V, Hs, m):
    return MembershipState(memberships_from_distances(distances(L, V, Hs), m), m)


def update_estimated_labels(Hs, memberships: MembershipState, V, on_singular="raise", max_condition=None):
    """Stationary point of the fuzzy objective in L.

    ``L = (sum_i P_i^m)^-1 (sum_i P_i^m H_i) V^T (V V^T)^-1``; for square,
    invertible ``V`` this is the solution of ``L V = S`` with ``S`` the
    membership-weighted mean of the candidates.

    Ill-conditioned ``V``: with ``on_singular="raise"`` a condition number
    above ``max_condition`` (default 1e12) raises :class:`SingularityError`.
    With ``on_singular="pinv"`` a condition number above ``max_condition``
    (default 1e2) switches to the minimum-norm minimizer ``S V^+``, dropping
    singular values below ``1/max_condition`` of the largest.  Along the
    retained directions this is the exact minimizer; along the dropped ones
    ``L`` is left at zero instead of being blown up by a tiny singular value,
    so stationarity holds only up to the size of those singular values.
    """
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise DimensionError(f"V must be square, got {V.shape}")
    if on_singular not in ("raise", "pinv"):
        raise ParameterError(f"on_singular must be 'raise' or 'pinv', got {on_singular!r}")
    if max_condition is None:
        max_condition = MAX_CONDITION if on_singular == "raise" else PINV_MAX_CONDITION
    Wt = memberships.weights
    if not Hs or Wt.shape != (len(Hs), Hs[0].shape[0]):
        raise DimensionError(f"memberships {Wt.shape} do not match {len(Hs)} candidates")
    total = Wt.sum(axis=0)
    if np.any(total <= 0):
        raise SingularityError("a row has zero total membership weight")
    S = sum(w[:, None] * H for w, H in zip(Wt, Hs)) / total[:, None]

    cond = np.linalg.cond(V)
    if cond <= max_condition:
        # L V = S  <=>  V^T L^T = S^T
        return np.linalg.solve(V.T, S.T).T
    if on_singular == "raise":
        raise SingularityError(f"label projection is ill-conditioned (condition number {cond:.3g})")
    return S @ np.linalg.pinv(V, rcond=1.0 / max_condition)


def label_gradient(L, V, Hs, memberships: MembershipState):
    """Gradient of :func:`fuzzy_objective` in L (up to the factor 2)."""
    LV = L @ V
    G = sum(w[:, None] * (LV - H) for w, H in zip(memberships.weights, Hs))
    return G @ V.T


@dataclass(frozen=True)
class LabelEstimate:
    labels: np.ndarray
    memberships: MembershipState
    candidates: list
    trace: list = field(default_factory=list)


def estimate_labels(Xs, projections: ProjectionSet, hp) -> LabelEstimate:
    """Alternate membership and label updates for ``hp.max_iter_fuzzy`` rounds.

    Starts from uniform memberships and ``L = H_1``.  ``trace[0]`` is the
    objective of the starting point; ``trace[t]`` follows round ``t``.
    """
    Ws, V = projections.W, projections.V
    Hs = [H.astype(np.float64) for H in candidate_codes(Xs, Ws)]
    n, K = Hs[0].shape[0], len(Hs)
    if n == 0:
        raise DimensionError("no unlabeled rows to estimate labels for")
    if V.shape[0] != V.shape[1]:
        raise DimensionError(f"label-stage V must be square, got {V.shape}")

    if hp.on_singular == "pinv" and np.linalg.cond(V) > PINV_MAX_CONDITION:
        log.warning(
            "label projection is ill-conditioned (condition number %.3g); "
            "estimating labels with its pseudo-inverse", np.linalg.cond(V),
        )

    P = MembershipState.uniform(K, n, hp.m)
    L = Hs[0].copy()
    trace = [fuzzy_objective(L, V, Hs, P)]
    for _ in range(hp.max_iter_fuzzy):
        P = update_memberships(L, V, Hs, hp.m)
        L = update_estimated_labels(Hs, P, V, on_singular=hp.on_singular)
        trace.append(fuzzy_objective(L, V, Hs, P))
    return LabelEstimate(labels=L, memberships=P, candidates=[H.astype(np.int8) for H in Hs], trace=trace)
