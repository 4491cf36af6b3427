import csv

import numpy as np
import pytest
from conftest import planted_thetas, separation_ratio

from caselens import embed
from caselens.embed import (
    EXAGGERATION_ITERS,
    _grad_loops,
    _grad_numpy,
    conditional_affinities,
    joint_affinities,
    tsne,
    write_embedding_csv,
)
from caselens._accel import py_func


def test_precondition_rejects_tiny_input():
    with pytest.raises(ValueError, match="3 \\* perplexity"):
        tsne(np.ones((2, 1)), perplexity=5.0)


def test_rejects_nonfinite():
    X = np.ones((40, 2))
    X[3, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        tsne(X, perplexity=5.0)


def test_conditional_rows_hit_perplexity():
    X, _ = planted_thetas(60, 1)
    sq = (X * X).sum(1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * X @ X.T, 0)
    np.fill_diagonal(d2, 0)
    P = conditional_affinities(d2, np.log(10.0), 1e-5, 200)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(np.diag(P) == 0)
    H = -np.sum(np.where(P > 0, P * np.log(np.where(P > 0, P, 1)), 0), axis=1)
    assert np.max(np.abs(H - np.log(10.0))) < 1e-5


def test_joint_affinities_normalized():
    X, _ = planted_thetas(30, 2)
    P = joint_affinities(X, 5.0)
    assert P.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(P, P.T, atol=0)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    X, _ = planted_thetas(20, 3)
    P = joint_affinities(X, 4.0)
    Y = rng.standard_normal((20, 2))
    grad, kl = _grad_numpy(Y, P, 1.0)
    h = 1e-6
    for i, d in [(0, 0), (5, 1), (13, 0)]:
        Yp, Ym = Y.copy(), Y.copy()
        Yp[i, d] += h
        Ym[i, d] -= h
        fd = (_grad_numpy(Yp, P, 1.0)[1] - _grad_numpy(Ym, P, 1.0)[1]) / (2 * h)
        assert grad[i, d] == pytest.approx(fd, rel=1e-5, abs=1e-8)
    g2, kl2 = py_func(_grad_loops)(Y, P, 1.0)
    np.testing.assert_allclose(g2, grad, rtol=1e-10, atol=1e-14)
    assert kl2 == pytest.approx(kl, rel=1e-12)


def test_kl_windows_separation_and_determinism():
    X, groups = planted_thetas(60, 0)
    e = tsne(X, perplexity=10.0, iterations=1000, learning_rate="auto", seed=0)
    h = np.array(e.kl_history)
    assert len(h) == 1001
    assert all(h[t + 50] <= h[t] + 1e-6 for t in range(EXAGGERATION_ITERS, len(h) - 50))
    assert separation_ratio(e.coords, groups) > 3
    assert np.all(np.isfinite(e.coords))
    np.testing.assert_allclose(e.coords.mean(axis=0), 0.0, atol=1e-9)
    again = tsne(X, perplexity=10.0, iterations=1000, learning_rate="auto", seed=0)
    assert again.coords.tobytes() == e.coords.tobytes()
    other = tsne(X, perplexity=10.0, iterations=1000, learning_rate="auto", seed=1)
    assert other.coords.tobytes() != e.coords.tobytes()


def test_duplicate_rows_are_jittered():
    X = np.vstack([np.tile([0.5, 0.5], (20, 1)), np.tile([0.9, 0.1], (20, 1))])
    e = tsne(X, perplexity=5.0, iterations=300, seed=2)
    assert np.all(np.isfinite(e.coords))
    assert e.params["learning_rate"] == 200.0


def test_auto_learning_rate():
    X, _ = planted_thetas(60, 0)
    assert tsne(X, perplexity=10.0, iterations=1, learning_rate="auto").params["learning_rate"] == 50.0


def test_adaptive_gains_runs():
    X, groups = planted_thetas(60, 4)
    e = tsne(X, perplexity=10.0, iterations=400, learning_rate="auto", seed=0, adaptive_gains=True)
    assert np.all(np.isfinite(e.coords))


def test_csv_output(tmp_path):
    X, _ = planted_thetas(30, 0)
    ids = [f"c{i}" for i in range(30)]
    e = tsne(X, perplexity=5.0, iterations=50, seed=0, case_ids=ids)
    write_embedding_csv(e, tmp_path / "e.csv", {"c0": 1}, {"c0": "eviction"})
    rows = list(csv.DictReader(open(tmp_path / "e.csv")))
    assert list(rows[0]) == ["case_id", "x", "y", "primary_topic", "label_flags"]
    assert rows[0]["primary_topic"] == "1" and rows[0]["label_flags"] == "eviction"
    assert float(rows[5]["x"]) == e.coords[5, 0]
    assert set(e.as_dict()) == set(ids)


def test_backend_dispatch(monkeypatch):
    calls = []
    monkeypatch.setattr(embed, "BACKEND", "numpy")
    monkeypatch.setattr(embed, "_grad_numpy", lambda *a: calls.append(1) or _grad_numpy(*a))
    X, _ = planted_thetas(30, 0)
    tsne(X, perplexity=5.0, iterations=3)
    assert len(calls) == 4
