"""Smoke tests for the _causalscore extension module."""

import numpy as np
import pytest

cs = pytest.importorskip("_causalscore")


def test_gen_rct_is_deterministic():
    f1, t1 = cs.gen_rct(500, 5, 11)
    f2, t2 = cs.gen_rct(500, 5, 11)
    assert np.array_equal(np.asarray(f1.covariates), np.asarray(f2.covariates))
    assert np.array_equal(np.asarray(f1.outcome), np.asarray(f2.outcome))
    assert t1.ate == t2.ate
    f3, _ = cs.gen_rct(500, 5, 12)
    assert not np.array_equal(np.asarray(f1.covariates), np.asarray(f3.covariates))


def test_rct_outcome_identity():
    frame, truth = cs.gen_rct(2000, 5, 3)
    x = np.asarray(frame.covariates)
    mu0 = x[:, 0] * x[:, 1] + x[:, 2] + x[:, 3] * x[:, 4]
    rebuilt = np.asarray(truth.tau) * np.asarray(frame.treatment) + mu0
    assert np.allclose(np.asarray(frame.outcome), rebuilt, atol=1e-12)
    assert np.all(np.asarray(frame.propensity) == 0.5)


def test_energy_distance_against_numpy():
    rng = np.random.RandomState(0)
    a = rng.randn(40, 3)
    b = rng.randn(50, 3) + 0.4

    def brute(u, v):
        d = np.sqrt(((u[:, None, :] - v[None, :, :]) ** 2).sum(-1))
        return d.mean()

    expected = 2 * brute(a, b) - brute(a, a) - brute(b, b)
    assert cs.energy_distance(a, b) == pytest.approx(expected, abs=1e-10)
    assert cs.energy_distance(a, b) == cs.energy_distance(b, a)
    assert abs(cs.energy_distance(a, a)) < 1e-12


def test_fit_and_scores():
    frame, truth = cs.gen_rct(4000, 5, 7)
    split = cs.make_split(4000, seed=7)
    model = cs.fit_estimator("t_learner", frame, split.train_idx)
    assert model.family == "t_learner"
    est = cs.estimate_effect(model, frame, split.valid_idx)
    assert len(np.asarray(est.impact)) == len(split.valid_idx)

    q = cs.qini(est, frame, split.valid_idx)
    assert q["direction"] == "higher_better"
    e = cs.energy_score_cate(est, frame, split.valid_idx)
    assert e["direction"] == "lower_better"
    assert e["value"] >= -1e-12

    mse = cs.mse_tau(est, np.asarray(truth.tau), split.valid_idx)
    oracle = cs.mse_tau(
        cs.estimate_effect(model, frame, split.valid_idx), np.asarray(truth.tau),
        split.valid_idx)
    assert mse["value"] == oracle["value"]
    assert mse["value"] > 0


def test_erupt_two_row_example():
    frame = cs.CausalFrame(
        covariates=np.zeros((2, 1)),
        treatment=np.array([1.0, 0.0]),
        outcome=np.array([2.0, 4.0]),
        propensity=np.array([0.5, 0.5]),
    )
    score = cs.erupt(np.array([1.0, 1.0]), frame, np.array([0.5, 0.5]), [0, 1])
    assert score["value"] == pytest.approx(2.0)
    assert score["n_effective"] == 1


def test_run_search_roundtrip():
    frame, truth = cs.gen_rct(3000, 5, 9)
    split = cs.make_split(3000, seed=9)
    report = cs.run_search("rct_cate", frame, split, "qini", max_trials=8, seed=4,
                           truth=np.asarray(truth.tau))
    assert len(report["trials"]) == 8
    assert report["best_trial_id"] >= 0
    ok = [t for t in report["trials"] if t["status"] == "ok"]
    assert ok, "expected successful trials"
    for trial in ok:
        names = {(s["name"], s["split"]) for s in trial["scores"]}
        assert ("qini", "valid") in names
        assert ("mse_tau", "valid") in names

    again = cs.run_search("rct_cate", frame, split, "qini", max_trials=8, seed=4,
                          truth=np.asarray(truth.tau))
    a = [{k: v for k, v in t.items() if k != "wall_time"} for t in report["trials"]]
    b = [{k: v for k, v in t.items() if k != "wall_time"} for t in again["trials"]]
    assert a == b


def test_errors_surface_as_python_exceptions():
    frame, _ = cs.gen_rct(100, 5, 1)
    with pytest.raises(Exception):
        cs.fit_estimator("wald", frame, list(range(100)))  # no instrument


def test_spearman_hand_value():
    assert cs.spearman([3, 1, 4, 1, 5], [2, 0, 1, 1, 3]) == pytest.approx(7.25 / 9.5)
