"""Core types and preprocessing.

Feature matrices, label matrices and code matrices are plain 2-D numpy
arrays; the helpers here validate them.  Codes are held as ``int8`` arrays of
-1/+1 and real-valued data as ``float64``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, InvalidLabelError, ParameterError

LABEL_STAGE = "label"
CODE_STAGE = "code"


def as_matrix(X, name="matrix", allow_empty=False):
    """Return ``X`` as a 2-D float64 array with finite entries."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {X.shape}")
    if not allow_empty and X.size == 0:
        raise DimensionError(f"{name} is empty")
    if not np.all(np.isfinite(X)):
        raise ParameterError(f"{name} contains non-finite values")
    return X


def check_codes(B, name="codes"):
    B = np.asarray(B)
    if B.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {B.shape}")
    if not np.all((B == 1) | (B == -1)):
        raise ParameterError(f"{name} must contain only -1 and +1")
    return B.astype(np.int8, copy=False)


def sign(A):
    """Elementwise sign with sign(0) = +1, returned as int8 codes."""
    return np.where(np.asarray(A) >= 0, 1, -1).astype(np.int8)


def check_same_rows(mats, names=None):
    rows = {m.shape[0] for m in mats}
    if len(rows) > 1:
        what = ", ".join(names) if names else "inputs"
        raise DimensionError(f"row counts differ across {what}: {sorted(rows)}")


# --------------------------------------------------------------------------
# code packing

def pack_codes(B):
    """Pack a +-1 code matrix into bytes, +1 -> bit 1, -1 -> bit 0."""
    B = check_codes(B)
    return np.packbits(B > 0, axis=1)


def unpack_codes(packed, n_bits):
    packed = np.asarray(packed, dtype=np.uint8)
    if packed.ndim != 2 or packed.shape[1] != (n_bits + 7) // 8:
        raise DimensionError(
            f"packed shape {packed.shape} does not hold {n_bits} bits per row"
        )
    bits = np.unpackbits(packed, axis=1, count=n_bits)
    return (bits.astype(np.int8) * 2 - 1).astype(np.int8)


# --------------------------------------------------------------------------
# hyperparameters and projections

@dataclass(frozen=True)
class Hyperparameters:
    """Training settings.

    ``beta_l`` / ``beta_u`` left as ``None`` are filled from the split sizes
    at training time (see :meth:`resolve_betas`).
    """

    alpha: float = 100.0
    gamma: float = 0.01
    beta_l: Optional[float] = None
    beta_u: Optional[float] = None
    step: float = 0.001
    m: float = 2.0
    max_iter_hash: int = 400
    max_iter_fuzzy: int = 15
    seed: int = 0
    tol: float = 1e-6
    # label estimation when the label projection is near-singular: "raise" or "pinv"
    on_singular: str = "pinv"

    def __post_init__(self):
        # alpha = 0 is accepted for label-free ablations
        if not self.alpha >= 0:
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")
        if not self.gamma >= 0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")
        if not self.step >= 0:
            raise ParameterError(f"step must be >= 0, got {self.step}")
        for name in ("beta_l", "beta_u"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ParameterError(f"{name} must be >= 0, got {v}")
        if not self.m > 1:
            raise ParameterError(f"fuzzifier m must be > 1, got {self.m}")
        if self.max_iter_hash < 1 or self.max_iter_fuzzy < 1:
            raise ParameterError("iteration caps must be >= 1")
        if self.on_singular not in ("raise", "pinv"):
            raise ParameterError(f"on_singular must be 'raise' or 'pinv', got {self.on_singular!r}")
        if not self.tol >= 0:
            raise ParameterError(f"tol must be >= 0, got {self.tol}")

    def resolve_betas(self, n_labeled, n_unlabeled):
        """Fill missing weights: beta_l = n_u/n, beta_u = 0.1 n_l/n.

        A fully labeled split would zero beta_l under that rule and leave the
        code stage with nothing to fit, so beta_l defaults to 1 when n_u = 0.
        """
        n = n_labeled + n_unlabeled
        beta_l = self.beta_l
        beta_u = self.beta_u
        if beta_l is None:
            beta_l = n_unlabeled / n if n_unlabeled > 0 else 1.0
        if beta_u is None:
            beta_u = 0.1 * n_labeled / n
        return replace(self, beta_l=float(beta_l), beta_u=float(beta_u))

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**d)


def _freeze(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ProjectionSet:
    """Per-modality projections ``W`` (d_i x width) plus label projection ``V`` (l x width)."""

    W: tuple
    V: np.ndarray
    stage: str = LABEL_STAGE

    def __post_init__(self):
        W = tuple(_freeze(w) for w in self.W)
        V = _freeze(self.V)
        if not W:
            raise DimensionError("at least one modality projection is required")
        if any(w.ndim != 2 for w in W) or V.ndim != 2:
            raise DimensionError("projections must be 2-D")
        width = V.shape[1]
        if any(w.shape[1] != width for w in W):
            raise DimensionError(
                f"projection widths differ: {[w.shape[1] for w in W]} vs V {width}"
            )
        if self.stage not in (LABEL_STAGE, CODE_STAGE):
            raise ParameterError(f"unknown stage {self.stage!r}")
        if self.stage == LABEL_STAGE and V.shape[0] != width:
            raise DimensionError(f"label-stage V must be square, got {V.shape}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "V", V)

    @property
    def width(self):
        return self.V.shape[1]

    @property
    def n_labels(self):
        return self.V.shape[0]

    @property
    def dims(self):
        return tuple(w.shape[0] for w in self.W)

    def __eq__(self, other):
        if not isinstance(other, ProjectionSet):
            return NotImplemented
        return (
            self.stage == other.stage
            and len(self.W) == len(other.W)
            and all(_bit_equal(a, b) for a, b in zip(self.W, other.W))
            and _bit_equal(self.V, other.V)
        )


def _bit_equal(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return a.shape == b.shape and a.dtype == b.dtype and a.tobytes() == b.tobytes()


def init_projections(dims, n_labels, width, seed, stage=LABEL_STAGE):
    """Random projections with unit-norm columns.

    Entries are standard normal draws from one seeded generator, in the order
    W_1, ..., W_K, V.
    """
    dims = [int(d) for d in dims]
    if not dims or any(d < 1 for d in dims) or n_labels < 1 or width < 1:
        raise ParameterError(
            f"dimensions must be positive (dims={dims}, labels={n_labels}, width={width})"
        )
    rng = np.random.default_rng(seed)

    def draw(rows):
        A = rng.standard_normal((rows, width))
        return A / np.linalg.norm(A, axis=0, keepdims=True)

    W = [draw(d) for d in dims]
    V = draw(n_labels)
    return ProjectionSet(W=tuple(W), V=V, stage=stage)


# --------------------------------------------------------------------------
# trained model

@dataclass(frozen=True, eq=False)
class TrainedModel:
    projections: ProjectionSet
    means: tuple
    codes: np.ndarray
    hyperparameters: Hyperparameters = field(default_factory=Hyperparameters)

    def __post_init__(self):
        means = tuple(_freeze(np.ravel(mu)) for mu in self.means)
        codes = check_codes(self.codes).copy()
        codes.flags.writeable = False
        if self.projections.stage != CODE_STAGE:
            raise ParameterError("a trained model holds code-stage projections")
        if len(means) != len(self.projections.W):
            raise DimensionError(
                f"{len(means)} mean vectors for {len(self.projections.W)} modalities"
            )
        for i, (mu, d) in enumerate(zip(means, self.projections.dims)):
            if mu.shape[0] != d:
                raise DimensionError(f"modality {i}: mean has {mu.shape[0]} entries, W has {d} rows")
        if codes.shape[1] != self.code_length:
            raise DimensionError(
                f"codes have {codes.shape[1]} bits, projections produce {self.code_length}"
            )
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "codes", codes)

    @property
    def n_modalities(self):
        return len(self.means)

    @property
    def n_labels(self):
        return self.projections.n_labels

    @property
    def code_length(self):
        return self.projections.width

    def __eq__(self, other):
        if not isinstance(other, TrainedModel):
            return NotImplemented
        return (
            self.projections == other.projections
            and len(self.means) == len(other.means)
            and all(_bit_equal(a, b) for a, b in zip(self.means, other.means))
            and _bit_equal(self.codes, other.codes)
            and self.hyperparameters == other.hyperparameters
        )


# --------------------------------------------------------------------------
# preprocessing

def zero_center(X):
    """Subtract column means. Returns ``(centered, mean)``."""
    X = as_matrix(X, "feature matrix")
    mean = X.mean(axis=0)
    return X - mean, mean


def encode_labels(multi_hot):
    """Map a 0/1 multi-hot matrix to a -1/+1 label matrix."""
    Y = np.asarray(multi_hot)
    if Y.ndim != 2:
        raise DimensionError(f"label matrix must be 2-D, got shape {Y.shape}")
    if not np.all((Y == 0) | (Y == 1)):
        raise InvalidLabelError("multi-hot labels must contain only 0 and 1")
    empty = np.flatnonzero(Y.sum(axis=1) == 0)
    if empty.size:
        raise InvalidLabelError(f"rows without any class: {empty[:10].tolist()}")
    return np.where(Y == 1, 1.0, -1.0)


@dataclass(frozen=True)
class Split:
    """Result of :func:`shuffle_split`.

    ``labels_u`` are the ground-truth multi-hot labels of the unlabeled part.
    Training never reads them; they exist so retrieval can judge relevance
    against the full training database.
    """

    X_l: list
    labels_l: np.ndarray
    X_u: list
    labels_u: np.ndarray
    permutation: np.ndarray

    @property
    def n_labeled(self):
        return self.labels_l.shape[0]

    @property
    def n_unlabeled(self):
        return self.labels_u.shape[0]

    @property
    def labels(self):
        return np.vstack([self.labels_l, self.labels_u])


def _permute(features, labels, seed):
    features = [np.asarray(X) for X in features]
    labels = np.asarray(labels)
    if not features:
        raise DimensionError("at least one modality is required")
    check_same_rows(features + [labels])
    perm = np.random.default_rng(seed).permutation(labels.shape[0])
    return [X[perm] for X in features], labels[perm], perm


def shuffle_split(features: Sequence, labels, label_fraction, seed=0):
    """Permute rows consistently, then keep labels for the first ceil(f*n) rows."""
    if not 0 < label_fraction <= 1:
        raise ParameterError(f"label_fraction must be in (0, 1], got {label_fraction}")
    Xs, Y, perm = _permute(features, labels, seed)
    n = Y.shape[0]
    # round off float noise such as 0.7 * 10 = 7.000000000000001
    n_l = min(n, math.ceil(round(label_fraction * n, 9)))
    return Split(
        X_l=[X[:n_l] for X in Xs],
        labels_l=Y[:n_l],
        X_u=[X[n_l:] for X in Xs],
        labels_u=Y[n_l:],
        permutation=perm,
    )


def holdout_split(features: Sequence, labels, test_fraction=0.05, seed=0):
    """Random query/database partition.

    Returns ``(train_features, train_labels, test_features, test_labels)``;
    the test part holds ceil(test_fraction * n) rows.
    """
    if not 0 < test_fraction < 1:
        raise ParameterError(f"test_fraction must be in (0, 1), got {test_fraction}")
    Xs, Y, _ = _permute(features, labels, seed)
    n_test = math.ceil(round(test_fraction * Y.shape[0], 9))
    if n_test >= Y.shape[0]:
        raise ParameterError("test split leaves no training rows")
    return (
        [X[n_test:] for X in Xs],
        Y[n_test:],
        [X[:n_test] for X in Xs],
        Y[:n_test],
    )
