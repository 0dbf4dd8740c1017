import math

import numpy as np
import pytest

import gsfde


def test_moments_and_integrals():
    assert gsfde.DelayMeasure.exponential(3.0).moment(1.0) == pytest.approx(1.5)
    assert gsfde.DelayMeasure.point_mass(1.0).moment(2.0) == pytest.approx(math.e**2)
    mu = gsfde.DelayMeasure.exponential(3.0)
    data = gsfde.InitialData.exponential_decay([1.0], 1.0)
    assert gsfde.integrate(mu, data, q=1.0)[0] == pytest.approx(0.75, abs=1e-6)
    assert gsfde.initial_norm(data, q=2.0) == pytest.approx(1.0)


def test_bad_measure_raises():
    with pytest.raises(gsfde.GsfdeError, match="invalid-measure"):
        gsfde.DelayMeasure(atoms=[(0.5, 0.5)])
    with pytest.raises(gsfde.GsfdeError, match="not-in-N_m"):
        gsfde.DelayMeasure.exponential(2.0).moment(2.0)


def test_certificate_and_verifier():
    p = gsfde.LinearParams()
    p.a_g, p.b_g, p.b_gamma = 2.0, 1.0, 0.3
    s = gsfde.build_linear_set(p)
    assert s.certificate.lambda1 == pytest.approx(1.5)
    assert s.certificate.lambda2 == pytest.approx(0.5)
    assert s.certificate.lambda5 == pytest.approx(0.09)
    assert gsfde.verify_a1(s, trials=500)["pass"]


def test_deterministic_decay():
    p = gsfde.LinearParams()
    p.a_g = 1.0
    rec = gsfde.simulate(
        gsfde.build_linear_set(p),
        gsfde.InitialData.constant([1.0]),
        gsfde.Scenario.constant(0.0, 0.0, 0.0),
        horizon=1.0,
        stride=100,
    )
    assert rec["states"].shape == (11, 1)
    assert abs(rec["states"][-1, 0] - math.exp(-1.0)) < 2e-3
    assert np.all(np.diff(rec["segment_norms"]) <= 0)


def test_quadratic_variation_band():
    path = gsfde.sample_path(gsfde.Scenario.random(0.3, 0.6), horizon=1.0, dt=1e-3, seed=4)
    d = np.diff(path["qv"])
    assert np.all(d >= 0.09e-3 * (1 - 1e-12)) and np.all(d <= 0.36e-3 * (1 + 1e-12))


def test_session_feasibility_and_small_run():
    cfg = gsfde.default_config()
    cfg.paths = 100
    cfg.horizon = 1.0
    cfg.checkpoints = [0.5, 1.0]
    s = gsfde.ExperimentSession(cfg)
    assert s.feasible()
    k = s.constants()
    assert k["L2"] == pytest.approx(2 * k["M"])
    v = s.run("ms_bound")
    assert v["passed"], v
    assert [r["t"] for r in v["rows"]] == [0.5, 1.0]


def test_config_errors_carry_the_field():
    with pytest.raises(gsfde.GsfdeError, match="space.dims"):
        gsfde.parse_config('{"space": {"dims": 1}}')
    assert "ms_bound" in gsfde.experiment_names()
