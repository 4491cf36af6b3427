"""Exact t-SNE of document-topic vectors, emitted as 2D plot data."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._accel import BACKEND, kernel

log = logging.getLogger(__name__)

EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
MOMENTUM_EARLY = 0.5
MOMENTUM_LATE = 0.8
INIT_STD = 1e-4
PERPLEXITY_TOL = 1e-5
MIN_GAIN = 0.01


@kernel
def conditional_affinities(dist2, log_perplexity, tol, max_steps):
    """Row-wise Gaussian affinities whose entropy matches ``log_perplexity``.

    Precision per row is found by bisection; rows sum to 1, diagonal is 0.
    """
    n = dist2.shape[0]
    P = np.zeros((n, n))
    row = np.empty(n)
    for i in range(n):
        dmin = np.inf
        for j in range(n):
            if j != i and dist2[i, j] < dmin:
                dmin = dist2[i, j]
        beta = 1.0
        lo = -np.inf
        hi = np.inf
        for _ in range(max_steps):
            s = 0.0
            sd = 0.0
            for j in range(n):
                if j == i:
                    row[j] = 0.0
                else:
                    d = dist2[i, j] - dmin
                    row[j] = np.exp(-beta * d)
                    s += row[j]
                    sd += d * row[j]
            H = np.log(s) + beta * sd / s
            diff = H - log_perplexity
            if abs(diff) < tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = beta / 2.0 if lo == -np.inf else (beta + lo) / 2.0
        for j in range(n):
            P[i, j] = row[j] / s
    return P


@kernel
def _grad_loops(Y, P, exaggeration):
    n = Y.shape[0]
    num = np.zeros((n, n))
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dx = Y[i, 0] - Y[j, 0]
            dy = Y[i, 1] - Y[j, 1]
            v = 1.0 / (1.0 + dx * dx + dy * dy)
            num[i, j] = v
            num[j, i] = v
            total += 2.0 * v
    grad = np.zeros((n, 2))
    kl = 0.0
    for i in range(n):
        gx = 0.0
        gy = 0.0
        for j in range(n):
            if i == j:
                continue
            q = num[i, j] / total
            p = P[i, j]
            mult = (exaggeration * p - q) * num[i, j]
            gx += mult * (Y[i, 0] - Y[j, 0])
            gy += mult * (Y[i, 1] - Y[j, 1])
            if p > 0.0:
                kl += p * np.log(p / max(q, 1e-300))
        grad[i, 0] = 4.0 * gx
        grad[i, 1] = 4.0 * gy
    return grad, kl


def _grad_numpy(Y, P, exaggeration):
    sq = np.sum(Y * Y, axis=1)
    num = 1.0 / (1.0 + np.maximum(sq[:, None] + sq[None, :] - 2.0 * Y @ Y.T, 0.0))
    np.fill_diagonal(num, 0.0)
    Q = num / num.sum()
    W = (exaggeration * P - Q) * num
    grad = 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)
    nz = P > 0
    kl = float(np.sum(P[nz] * np.log(P[nz] / np.maximum(Q[nz], 1e-300))))
    return grad, kl


def tsne_gradient(Y, P, exaggeration=1.0):
    """Gradient of KL(P || Q) w.r.t. the embedding, and the KL value (unexaggerated P)."""
    if BACKEND == "numba":
        return _grad_loops(Y, P, exaggeration)
    return _grad_numpy(Y, P, exaggeration)


def joint_affinities(X: np.ndarray, perplexity: float) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    dist2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    np.fill_diagonal(dist2, 0.0)
    P_cond = conditional_affinities(dist2, float(np.log(perplexity)), PERPLEXITY_TOL, 200)
    P = P_cond + P_cond.T
    return P / P.sum()


@dataclass
class Embedding2D:
    case_ids: list[str]
    coords: np.ndarray
    kl: float
    kl_history: list[float] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def as_dict(self) -> dict[str, tuple[float, float]]:
        return {c: (float(x), float(y)) for c, (x, y) in zip(self.case_ids, self.coords)}


def tsne(
    thetas: np.ndarray,
    perplexity: float = 30.0,
    iterations: int = 1000,
    learning_rate: float | str = 200.0,
    seed: int = 0,
    case_ids: Sequence[str] | None = None,
    adaptive_gains: bool = False,
) -> Embedding2D:
    """Exact t-SNE with early exaggeration, momentum switch and adaptive gains.

    ``kl_history[t]`` is the KL divergence (against the unexaggerated
    affinities) at the start of iteration ``t``. ``learning_rate="auto"``
    uses max(D / 48, 50); a fixed 200 overshoots on a few hundred points or
    fewer once clusters tighten.
    """
    X = np.asarray(thetas, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError("thetas must be a D x K matrix with K >= 1")
    D = X.shape[0]
    if not np.all(np.isfinite(X)):
        raise ValueError("thetas contain non-finite values")
    if perplexity <= 0 or D < 3 * perplexity:
        raise ValueError(f"need D >= 3 * perplexity (D={D}, perplexity={perplexity})")
    if learning_rate == "auto":
        learning_rate = max(D / EXAGGERATION / 4.0, 50.0)
    learning_rate = float(learning_rate)
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    if case_ids is None:
        case_ids = [str(i) for i in range(D)]
    if len(case_ids) != D:
        raise ValueError("case_ids must match the number of rows")

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x75])))
    _, first = np.unique(X, axis=0, return_index=True)
    dup = np.ones(D, dtype=bool)
    dup[first] = False
    if dup.any():
        X = X.copy()
        X[dup] += 1e-10 * rng.standard_normal((int(dup.sum()), X.shape[1]))

    P = joint_affinities(X, perplexity)
    Y = INIT_STD * rng.standard_normal((D, 2))
    Y -= Y.mean(axis=0)
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    history = []
    for it in range(iterations):
        early = it < EXAGGERATION_ITERS
        if it == EXAGGERATION_ITERS:
            # the two phases optimize different objectives; start the second from rest
            update[:] = 0.0
            gains[:] = 1.0
        grad, kl = tsne_gradient(Y, P, EXAGGERATION if early else 1.0)
        history.append(float(kl))
        momentum = MOMENTUM_EARLY if early else MOMENTUM_LATE
        if adaptive_gains:
            same = (grad > 0) == (update > 0)
            gains = np.where(same, gains * 0.8, gains + 0.2)
            np.maximum(gains, MIN_GAIN, out=gains)
        update = momentum * update - learning_rate * gains * grad
        Y = Y + update
        Y -= Y.mean(axis=0)
    final_kl = tsne_gradient(Y, P, 1.0)[1]
    history.append(float(final_kl))
    params = dict(perplexity=perplexity, iterations=iterations, learning_rate=learning_rate, seed=seed)
    return Embedding2D(list(case_ids), Y, float(final_kl), history, params)


def write_embedding_csv(
    emb: Embedding2D,
    path: str | Path,
    primary_topics: Mapping[str, int] | None = None,
    label_flags: Mapping[str, str] | None = None,
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "x", "y", "primary_topic", "label_flags"])
        for cid, (x, y) in zip(emb.case_ids, emb.coords):
            pt = "" if primary_topics is None else primary_topics.get(cid, "")
            flags = "" if label_flags is None else label_flags.get(cid, "")
            w.writerow([cid, repr(float(x)), repr(float(y)), pt, flags])
