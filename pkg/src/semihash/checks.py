"""Numerical self-checks run by ``semihash gradcheck``.

Each suite draws small seeded instances and compares an implementation
against an independent computation.  Functions under test are looked up on
their modules at call time, so a patched implementation is what gets checked.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import code_stage, fuzzy, label_stage, retrieval
from .data import CODE_STAGE, LABEL_STAGE, Hyperparameters, ProjectionSet


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def central_difference(f, A, h=1e-6):
    """Numerical gradient of scalar ``f`` at matrix ``A``."""
    G = np.zeros_like(A)
    for idx in np.ndindex(A.shape):
        Ap = A.copy()
        Am = A.copy()
        Ap[idx] += h
        Am[idx] -= h
        G[idx] = (f(Ap) - f(Am)) / (2 * h)
    return G


def relative_error(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))


def _random_hp(rng):
    return Hyperparameters(
        alpha=float(rng.uniform(0.5, 5.0)),
        gamma=float(rng.uniform(0.01, 1.0)),
        beta_l=float(rng.uniform(0.1, 1.0)),
        beta_u=float(rng.uniform(0.1, 1.0)),
    )


def _label_instance(rng):
    K = int(rng.integers(1, 4))
    n = int(rng.integers(2, 9))
    l = int(rng.integers(1, 4))
    Xs = [rng.standard_normal((n, int(rng.integers(1, 6)))) for _ in range(K)]
    L = np.where(rng.random((n, l)) < 0.5, 1.0, -1.0)
    H = np.where(rng.random((n, l)) < 0.5, 1.0, -1.0)
    Ws = [rng.standard_normal((X.shape[1], l)) for X in Xs]
    V = rng.standard_normal((l, l))
    return Xs, L, H, Ws, V


def _code_instance(rng):
    K = int(rng.integers(1, 4))
    n_l = int(rng.integers(1, 6))
    n_u = int(rng.integers(1, 6))
    l = int(rng.integers(1, 4))
    c = int(rng.integers(1, 5))
    dims = [int(rng.integers(1, 6)) for _ in range(K)]
    Xl = [rng.standard_normal((n_l, d)) for d in dims]
    Xu = [rng.standard_normal((n_u, d)) for d in dims]
    Ll = np.where(rng.random((n_l, l)) < 0.5, 1.0, -1.0)
    Lu = rng.standard_normal((n_u, l))
    Bl = np.where(rng.random((n_l, c)) < 0.5, 1.0, -1.0)
    Bu = np.where(rng.random((n_u, c)) < 0.5, 1.0, -1.0)
    Ws = [rng.standard_normal((d, c)) for d in dims]
    V = rng.standard_normal((l, c))
    return Xl, Xu, Ll, Lu, Bl, Bu, Ws, V


def check_gradients(n_instances=20, seed=0, tol=1e-5):
    """Analytic gradients of both stages against central differences."""
    rng = np.random.default_rng(seed)
    worst = {"label W": 0.0, "label V": 0.0, "code W": 0.0, "code V": 0.0}
    for _ in range(n_instances):
        hp = _random_hp(rng)
        Xs, L, H, Ws, V = _label_instance(rng)

        def e_label(Ws_, V_):
            return label_stage.objective_label(Xs, L, ProjectionSet(tuple(Ws_), V_, LABEL_STAGE), H, hp, normalize=True)

        for i, (X, W) in enumerate(zip(Xs, Ws)):
            num = central_difference(lambda A: e_label(Ws[:i] + [A] + Ws[i + 1:], V), W)
            worst["label W"] = max(worst["label W"], relative_error(label_stage.grad_W_label(X, H, W, hp), num))
        num = central_difference(lambda A: e_label(Ws, A), V)
        worst["label V"] = max(worst["label V"], relative_error(label_stage.grad_V_label(L, H, V, hp), num))

        Xl, Xu, Ll, Lu, Bl, Bu, Ws, V = _code_instance(rng)

        def e_code(Ws_, V_):
            return code_stage.objective_code(Xl, Xu, Ll, Lu, ProjectionSet(tuple(Ws_), V_, CODE_STAGE), Bl, Bu, hp, normalize=True)

        for i, W in enumerate(Ws):
            num = central_difference(lambda A: e_code(Ws[:i] + [A] + Ws[i + 1:], V), W)
            worst["code W"] = max(worst["code W"], relative_error(code_stage.grad_W_code(Xl[i], Xu[i], Bl, Bu, W, hp), num))
        num = central_difference(lambda A: e_code(Ws, A), V)
        worst["code V"] = max(worst["code V"], relative_error(code_stage.grad_V_code(Ll, Lu, Bl, Bu, V, hp), num))

    return [
        CheckResult(f"finite differences: {k}", v < tol, f"worst relative error {v:.2e} (tol {tol:.0e})")
        for k, v in worst.items()
    ]


def check_sign_updates(n_instances=20, seed=1):
    """No single bit flip of the sign-update output lowers the objective."""
    rng = np.random.default_rng(seed)
    failures = {"label H": 0, "code B": 0}
    for _ in range(n_instances):
        hp = _random_hp(rng)
        Xs, L, _, Ws, V = _label_instance(rng)
        proj = ProjectionSet(tuple(Ws), V, LABEL_STAGE)
        H = label_stage.update_H_label(Xs, Ws, L, V, hp).astype(np.float64)
        base = label_stage.objective_label(Xs, L, proj, H, hp)
        for idx in np.ndindex(H.shape):
            F = H.copy()
            F[idx] *= -1
            if label_stage.objective_label(Xs, L, proj, F, hp) < base - 1e-9 * max(1.0, abs(base)):
                failures["label H"] += 1

        Xl, Xu, Ll, Lu, _, _, Ws, V = _code_instance(rng)
        proj = ProjectionSet(tuple(Ws), V, CODE_STAGE)
        Bl, Bu = (B.astype(np.float64) for B in code_stage.update_B(Xl, Xu, Ws, Ll, Lu, V, hp))
        base = code_stage.objective_code(Xl, Xu, Ll, Lu, proj, Bl, Bu, hp)
        for which, B in (("l", Bl), ("u", Bu)):
            for idx in np.ndindex(B.shape):
                F = B.copy()
                F[idx] *= -1
                args = (F, Bu) if which == "l" else (Bl, F)
                if code_stage.objective_code(Xl, Xu, Ll, Lu, proj, *args, hp) < base - 1e-9 * max(1.0, abs(base)):
                    failures["code B"] += 1
    return [
        CheckResult(f"single-bit flips: {k}", v == 0, f"{v} improving flips over {n_instances} instances")
        for k, v in failures.items()
    ]


def simplex_minimum(d, m):
    """Minimize ``sum p_i^m d_i`` over the simplex by nested bounded 1-D searches (K <= 3)."""
    d = np.asarray(d, dtype=np.float64)
    opts = {"xatol": 1e-12, "maxiter": 500}
    if d.size == 1:
        return np.array([1.0])
    if d.size == 2:
        r = minimize_scalar(lambda a: a**m * d[0] + (1 - a) ** m * d[1], bounds=(0, 1), method="bounded", options=opts)
        return np.array([r.x, 1 - r.x])
    if d.size == 3:
        def inner(a):
            rest = 1 - a
            r = minimize_scalar(
                lambda b: a**m * d[0] + b**m * d[1] + (rest - b) ** m * d[2],
                bounds=(0, rest), method="bounded", options=opts,
            )
            return r.fun, r.x

        r = minimize_scalar(lambda a: inner(a)[0], bounds=(0, 1), method="bounded", options=opts)
        b = inner(r.x)[1]
        return np.array([r.x, b, 1 - r.x - b])
    raise ValueError("brute-force simplex search supports K <= 3")


def check_memberships(n_tuples=100, seed=2, tol=1e-6):
    """Closed-form memberships against direct simplex minimization."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    simplex_ok = True
    for K in (1, 2, 3):
        for m in (1.5, 2.0, 3.0):
            D = rng.uniform(0.05, 5.0, size=(K, n_tuples))
            P = fuzzy.memberships_from_distances(D, m)
            simplex_ok &= bool(np.all(P >= 0) and np.allclose(P.sum(axis=0), 1, rtol=0, atol=1e-9))
            for r in range(n_tuples):
                worst = max(worst, float(np.max(np.abs(P[:, r] - simplex_minimum(D[:, r], m)))))
    hand = fuzzy.memberships_from_distances(np.array([[1.0], [3.0]]), 2.0)[:, 0]
    hand_ok = bool(np.allclose(hand, [0.75, 0.25], rtol=0, atol=1e-12))
    return [
        CheckResult("memberships: closed form vs simplex search", worst < tol, f"max deviation {worst:.2e} (tol {tol:.0e})"),
        CheckResult("memberships: simplex invariant", simplex_ok, "sum to 1 within 1e-9, non-negative"),
        CheckResult("memberships: d=(1,3), m=2 -> (0.75, 0.25)", hand_ok, f"got {hand.round(12).tolist()}"),
    ]


def check_label_estimation(n_instances=10, seed=3):
    """Fuzzy objective never increases; label updates are stationary points."""
    rng = np.random.default_rng(seed)
    worst_rise = 0.0
    worst_grad = 0.0
    for _ in range(n_instances):
        K = int(rng.integers(1, 4))
        n = int(rng.integers(3, 30))
        l = int(rng.integers(1, 5))
        dims = [int(rng.integers(1, 8)) for _ in range(K)]
        Xs = [rng.standard_normal((n, d)) for d in dims]
        proj = ProjectionSet(tuple(rng.standard_normal((d, l)) for d in dims), rng.standard_normal((l, l)) + 2 * np.eye(l), LABEL_STAGE)
        hp = Hyperparameters(m=float(rng.choice([1.5, 2.0, 3.0])), max_iter_fuzzy=15)
        est = fuzzy.estimate_labels(Xs, proj, hp)
        worst_rise = max(worst_rise, float(np.max(np.diff(est.trace))))
        Hs = [H.astype(np.float64) for H in est.candidates]
        g = fuzzy.label_gradient(est.labels, proj.V, Hs, est.memberships)
        worst_grad = max(worst_grad, float(np.linalg.norm(g)))
    return [
        CheckResult("label estimation: objective non-increasing", worst_rise <= 1e-9, f"largest rise {worst_rise:.2e}"),
        CheckResult("label estimation: stationarity", worst_grad < 1e-8, f"largest gradient norm {worst_grad:.2e}"),
    ]


def _brute_map(Q, D, rel):
    aps = []
    for q in range(len(Q)):
        dist = [sum(1 for a, b in zip(Q[q], D[j]) if a != b) for j in range(len(D))]
        order = sorted(range(len(D)), key=lambda j: (dist[j], j))
        R = sum(rel[q])
        if R == 0:
            continue
        hits, total = 0, 0.0
        for k, j in enumerate(order, start=1):
            if rel[q][j]:
                hits += 1
                total += hits / k
        aps.append(total / R)
    return sum(aps) / len(aps) if aps else float("nan")


def check_retrieval(n_instances=50, seed=4):
    """Packed Hamming vs naive counts; vectorized MAP vs a plain-loop MAP."""
    rng = np.random.default_rng(seed)
    hamming_ok = True
    worst = 0.0
    for _ in range(n_instances):
        c = int(rng.integers(1, 20))
        Q = np.where(rng.random((int(rng.integers(1, 6)), c)) < 0.5, 1, -1)
        D = np.where(rng.random((int(rng.integers(1, 15)), c)) < 0.5, 1, -1)
        naive = np.array([[int(np.sum(q != d)) for d in D] for q in Q])
        hamming_ok &= bool(np.array_equal(retrieval.hamming_distances(Q, D), naive))
        rel = (rng.random((Q.shape[0], D.shape[0])) < 0.4).astype(int)
        if rel.sum() == 0:
            rel[0, 0] = 1
        fast = retrieval.mean_average_precision(Q, D, rel)[0]
        worst = max(worst, abs(fast - _brute_map(Q.tolist(), D.tolist(), rel.tolist())))
    return [
        CheckResult("retrieval: packed Hamming == naive", hamming_ok, f"{n_instances} random instances"),
        CheckResult("retrieval: MAP vs plain loop", worst <= 1e-12, f"max deviation {worst:.2e}"),
    ]


SUITES = (check_gradients, check_sign_updates, check_memberships, check_label_estimation, check_retrieval)


def run_all(seed=0):
    results = []
    for suite in SUITES:
        start = time.perf_counter()
        out = suite(seed=seed + SUITES.index(suite))
        elapsed = time.perf_counter() - start
        for r in out:
            r.seconds = elapsed / len(out)
        results.extend(out)
    return results
