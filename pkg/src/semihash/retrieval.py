"""Hamming ranking and mean average precision."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .code_stage import encode_out_of_sample
from .data import check_codes, pack_codes
from .errors import DimensionError, ParameterError

_QUERY_BLOCK = 256


def hamming_distance(a, b):
    """Number of positions where two +-1 code rows disagree."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"code lengths differ: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def hamming_distances(Q, D):
    """(n_query, n_db) Hamming distances via packed XOR + popcount."""
    Q = check_codes(np.atleast_2d(Q), "query codes")
    D = check_codes(np.atleast_2d(D), "database codes")
    if Q.shape[1] != D.shape[1]:
        raise DimensionError(f"code lengths differ: {Q.shape[1]} vs {D.shape[1]}")
    Qp, Dp = pack_codes(Q), pack_codes(D)
    out = np.empty((Q.shape[0], D.shape[0]), dtype=np.int64)
    # padding bits are 0 on both sides and never count
    for start in range(0, Q.shape[0], _QUERY_BLOCK):
        x = np.bitwise_xor(Qp[start:start + _QUERY_BLOCK, None, :], Dp[None, :, :])
        out[start:start + _QUERY_BLOCK] = np.bitwise_count(x).sum(axis=2, dtype=np.int64)
    return out


def rank_database(query, database):
    """Database indices by ascending Hamming distance, ties by ascending index."""
    d = hamming_distances(np.atleast_2d(query), database)[0]
    return np.argsort(d, kind="stable")


def relevance(query_labels, db_labels):
    """1 where query and database item share at least one class."""
    Q = (np.asarray(query_labels) > 0).astype(np.int64)
    D = (np.asarray(db_labels) > 0).astype(np.int64)
    if Q.shape[1] != D.shape[1]:
        raise DimensionError(f"label widths differ: {Q.shape[1]} vs {D.shape[1]}")
    return (Q @ D.T > 0).astype(np.int8)


def average_precision(ranking, rel_row, cutoff=None):
    """AP of one ranked list; ``nan`` when the query has no relevant item.

    Over the full ranking this is ``1/R * sum_k P@k * rel@k``.  With a cutoff,
    the sum runs over the top ``cutoff`` positions and is divided by the number
    of relevant items found there (0 when none are).
    """
    rel = np.asarray(rel_row)[np.asarray(ranking)]
    if rel.sum() == 0:
        return float("nan")
    if cutoff is not None:
        rel = rel[:cutoff]
    hits = np.cumsum(rel)
    found = hits[-1] if hits.size else 0
    if found == 0:
        return 0.0
    ranks = np.arange(1, rel.size + 1)
    return float(np.sum((hits / ranks) * rel) / found)


@dataclass
class EvalReport:
    task: str
    code_length: int
    map: float
    average_precisions: np.ndarray
    n_excluded: int = 0
    cutoff: Optional[int] = None

    @property
    def n_queries(self):
        return int(self.average_precisions.size)

    def to_csv(self):
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["task", "bits", "cutoff", "map", "queries", "excluded"])
        w.writerow([self.task, self.code_length, self.cutoff or "", repr(self.map), self.n_queries, self.n_excluded])
        w.writerow([])
        w.writerow(["query", "ap"])
        for i, ap in enumerate(self.average_precisions):
            w.writerow([i, repr(float(ap))])
        return out.getvalue()


def mean_average_precision(query_codes, db_codes, rel, cutoff=None, threads=1):
    """MAP of Hamming rankings.

    Returns ``(map, per_query_ap, n_excluded)``.  Queries without any
    relevant database item are excluded; ``per_query_ap`` holds the rest, in
    query order.
    """
    rel = np.asarray(rel)
    D = hamming_distances(query_codes, db_codes)
    if rel.shape != D.shape:
        raise DimensionError(f"relevance shape {rel.shape} vs distance shape {D.shape}")
    if cutoff is not None and cutoff < 1:
        raise ParameterError(f"cutoff must be >= 1, got {cutoff}")

    def chunk(rows):
        order = np.argsort(D[rows], axis=1, kind="stable")
        return [average_precision(order[j], rel[r], cutoff) for j, r in enumerate(rows)]

    idx = np.arange(D.shape[0])
    if threads > 1 and D.shape[0] > 1:
        parts = np.array_split(idx, threads)
        with ThreadPoolExecutor(threads) as pool:
            aps = [ap for part in pool.map(chunk, parts) for ap in part]
    else:
        aps = chunk(idx)
    aps = np.array(aps, dtype=np.float64)
    keep = ~np.isnan(aps)
    aps = aps[keep]
    value = float(aps.mean()) if aps.size else float("nan")
    return value, aps, int((~keep).sum())


def evaluate_cross_modal(
    model,
    query_features,
    query_labels,
    db_labels,
    query_modality,
    db_modality=None,
    db_features=None,
    cutoff=None,
    task=None,
    threads=1,
):
    """MAP for queries of one modality against a database of another.

    The database side defaults to the model's unified training codes; pass
    ``db_features`` (raw, uncentered) to encode the database through
    ``db_modality`` instead.
    """
    Q = encode_out_of_sample(query_features, query_modality, model)
    if db_features is not None:
        if db_modality is None:
            raise ParameterError("db_modality is required with db_features")
        DB = encode_out_of_sample(db_features, db_modality, model)
    else:
        DB = model.codes
    if DB.shape[0] != np.asarray(db_labels).shape[0]:
        raise DimensionError(f"{DB.shape[0]} database codes but {np.asarray(db_labels).shape[0]} label rows")
    rel = relevance(query_labels, db_labels)
    value, aps, excluded = mean_average_precision(Q, DB, rel, cutoff, threads)
    if task is None:
        target = "codes" if db_modality is None else db_modality
        task = f"{query_modality}->{target}"
    return EvalReport(task, model.code_length, value, aps, excluded, cutoff)


def feature_map(query_features, query_labels, db_features, db_labels):
    """MAP of Euclidean nearest-neighbour ranking on raw features (one modality)."""
    Q = np.asarray(query_features, dtype=np.float64)
    D = np.asarray(db_features, dtype=np.float64)
    dist = (Q * Q).sum(1)[:, None] - 2 * Q @ D.T + (D * D).sum(1)[None, :]
    rel = relevance(query_labels, db_labels)
    order = np.argsort(dist, axis=1, kind="stable")
    aps = np.array([average_precision(order[i], rel[i]) for i in range(Q.shape[0])])
    aps = aps[~np.isnan(aps)]
    return float(aps.mean())


def format_table(rows):
    """Plain-text table of MAP values, one row per (task, method), one column per bit width.

    ``rows`` maps ``(task, method)`` to ``{bits: map}``.
    """
    bits = sorted({b for v in rows.values() for b in v})
    head = f"{'Task':<14}{'Method':<16}" + "".join(f"{str(b) + ' bits':>11}" for b in bits)
    lines = [head, "-" * len(head)]
    for (task, method), vals in rows.items():
        cells = "".join(f"{vals[b]:>11.4f}" if b in vals else f"{'-':>11}" for b in bits)
        lines.append(f"{task:<14}{method:<16}{cells}")
    return "\n".join(lines)
