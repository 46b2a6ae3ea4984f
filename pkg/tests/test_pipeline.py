import numpy as np
import pytest

from semihash.data import Hyperparameters, holdout_split
from semihash.errors import DivergenceError
from semihash.pipeline import default_tasks, evaluate, fit
from semihash.synth import SynthSpec, generate


def _data(**kw):
    spec = SynthSpec(**{"n": 400, "n_classes": 4, "dims": (16, 8), "seed": 0, **kw})
    feats, Y = generate(spec)
    return holdout_split(feats, Y, 0.1, seed=0)


def test_full_labels_skip_estimation():
    Xtr, Ytr, _, _ = _data()
    res = fit(Xtr, Ytr, 1.0, Hyperparameters(max_iter_hash=20), code_length=8)
    assert res.label_estimate is None
    assert res.split.n_unlabeled == 0
    assert res.model.hyperparameters.beta_l == 1.0


def test_partial_labels_run_all_stages():
    Xtr, Ytr, _, _ = _data()
    res = fit(Xtr, Ytr, 0.3, Hyperparameters(max_iter_hash=20), code_length=8)
    assert res.split.n_labeled == 108
    assert res.label_estimate.labels.shape == (252, 4)
    assert res.model.codes.shape == (360, 8)


def test_codes_follow_input_order():
    Xtr, Ytr, _, _ = _data()
    res = fit(Xtr, Ytr, 0.5, Hyperparameters(max_iter_hash=20), code_length=8)
    np.testing.assert_array_equal(res.model.codes[res.split.permutation], res.code_stage.B)


def test_means_are_training_means():
    Xtr, Ytr, _, _ = _data()
    res = fit(Xtr, Ytr, 0.5, Hyperparameters(max_iter_hash=5), code_length=8)
    for X, mu in zip(Xtr, res.model.means):
        np.testing.assert_allclose(mu, X.mean(axis=0), rtol=1e-12, atol=1e-12)


def test_noiseless_retrieval_near_perfect():
    Xtr, Ytr, Xte, Yte = _data(noise=0.0)
    res = fit(Xtr, Ytr, 1.0, Hyperparameters(), code_length=32)
    for rep in evaluate(res.model, Xte, Yte, Ytr):
        assert rep.map > 0.95, rep.task


def test_default_tasks():
    assert [t[2] for t in default_tasks(2, ["image", "text"])] == ["image->text", "text->image"]
    assert len(default_tasks(3)) == 6


def test_divergence_reports_stage():
    Xtr, Ytr, _, _ = _data()
    with pytest.raises(DivergenceError) as err:
        fit([X * 1e4 for X in Xtr], Ytr, 1.0, Hyperparameters(step=1.0), code_length=8)
    assert err.value.stage == "label stage"


def test_deterministic():
    Xtr, Ytr, _, _ = _data()
    hp = Hyperparameters(max_iter_hash=30, seed=2)
    a = fit(Xtr, Ytr, 0.5, hp, code_length=8)
    b = fit(Xtr, Ytr, 0.5, hp, code_length=8)
    assert a.model == b.model
