"""End-to-end training and evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .code_stage import CodeStageState, train_code_stage
from .data import Hyperparameters, Split, TrainedModel, encode_labels, shuffle_split, zero_center
from .errors import SemihashError
from .fuzzy import LabelEstimate, estimate_labels
from .label_stage import LabelStageState, train_label_stage
from .retrieval import evaluate_cross_modal

log = logging.getLogger(__name__)


@dataclass
class FitResult:
    model: TrainedModel
    split: Split
    label_stage: LabelStageState
    label_estimate: Optional[LabelEstimate]
    code_stage: CodeStageState


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except SemihashError as exc:
        exc.stage = name
        raise


def fit(features, labels, label_fraction=1.0, hp: Hyperparameters = None, code_length=32) -> FitResult:
    """Train on ``features`` (list of (n, d_i)) with 0/1 ``labels`` (n, l).

    Only the first ``ceil(label_fraction * n)`` rows of a seeded shuffle keep
    their labels.  The model's codes are returned in the input row order so
    they line up with ``labels``.
    """
    hp = hp or Hyperparameters()
    split = shuffle_split(features, labels, label_fraction, hp.seed)
    n_l = split.n_labeled

    centered, means = [], []
    for X_l, X_u in zip(split.X_l, split.X_u):
        Xc, mu = zero_center(np.vstack([X_l, X_u]))
        centered.append(Xc)
        means.append(mu)
    X_l = [X[:n_l] for X in centered]
    X_u = [X[n_l:] for X in centered]
    L_l = encode_labels(split.labels_l)

    label_state = _stage("label stage", train_label_stage, X_l, L_l, hp)
    log.info("label stage: %d iterations, objective %.6g", label_state.iterations, label_state.trace[-1])

    estimate = None
    L_u = np.zeros((0, L_l.shape[1]))
    if split.n_unlabeled:
        estimate = _stage("label estimation", estimate_labels, X_u, label_state.projections, hp)
        L_u = estimate.labels
        log.info("label estimation: objective %.6g -> %.6g", estimate.trace[0], estimate.trace[-1])

    code_state = _stage("code stage", train_code_stage, X_l, X_u, L_l, L_u, hp, code_length, means=means)
    log.info("code stage: %d iterations, objective %.6g", code_state.iterations, code_state.trace[-1])

    # undo the shuffle so codes align with the caller's rows
    codes = np.empty_like(code_state.B)
    codes[split.permutation] = code_state.B
    model = TrainedModel(
        projections=code_state.projections,
        means=tuple(means),
        codes=codes,
        hyperparameters=code_state.hyperparameters,
    )
    return FitResult(model, split, label_state, estimate, code_state)


def default_tasks(n_modalities, names=None):
    """All ordered (query, database) modality pairs with query != database."""
    names = names or [str(i) for i in range(n_modalities)]
    return [
        (q, d, f"{names[q]}->{names[d]}")
        for q in range(n_modalities)
        for d in range(n_modalities)
        if q != d
    ]


def evaluate(model, test_features, test_labels, train_labels, names=None, cutoff=None, threads=1):
    """Cross-modal MAP for every ordered modality pair.

    Queries are held-out rows encoded from their own modality; the database
    is the model's unified training codes.
    """
    reports = []
    for q, d, task in default_tasks(model.n_modalities, names):
        reports.append(
            evaluate_cross_modal(
                model, test_features[q], test_labels, train_labels, q,
                db_modality=d, cutoff=cutoff, task=task, threads=threads,
            )
        )
    return reports
