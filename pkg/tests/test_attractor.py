"""Tests for absorbing radii, pullback contraction, and measure probes."""

import numpy as np
import pytest

from sphereflow.attractor import (
    absorbing_radii,
    absorption_check,
    class_R_decay,
    deterministic_r11,
    measure_ensemble,
    measure_report,
    measure_time_average,
    ou_history,
    pullback_experiment,
)
from sphereflow.noise import NoiseSpec
from sphereflow.operators import OperatorVariant
from sphereflow.solver import IntegratorConfig, ModelConfig, Simulator
from sphereflow.spectral import ScalarSpectrum, velocity_l2

L = 6
C_HAT = 0.4224


def _forcing():
    f = ScalarSpectrum.zeros(L)
    f.set_mode(2, 0, 0.4)
    f.set_mode(2, 1, 0.25 - 0.1j)
    return f


@pytest.fixture(scope="module")
def setup():
    noise = NoiseSpec(L=L, sigma=0.1, s=1.0, seed=9, dt_noise=0.01)
    model = ModelConfig(L=L, nu=1.0, Omega=1.0, alpha=0.3, forcing=_forcing())
    sim = Simulator(model, IntegratorConfig(dt=0.02), noise)
    return model, noise, sim, noise.path()


def test_sigma0_radius_matches_closed_form():
    model = ModelConfig(L=L, nu=1.0, forcing=_forcing())
    noise0 = NoiseSpec(L=L, sigma=0.0, s=1.0, seed=9, dt_noise=0.01)
    rad = absorbing_radii(model, noise0, noise0.path(), C_HAT, t_back=60.0)
    assert rad.r11 == pytest.approx(deterministic_r11(model), abs=1e-3)
    assert rad.r12 == 0.0
    assert rad.r13 == rad.r11


def test_noncoercive_variant_is_rejected():
    model = ModelConfig(L=L, nu=1.0, variant=OperatorVariant.DELTA_PLUS_TWO_RIC)
    noise0 = NoiseSpec(L=L, sigma=0.0, s=1.0, seed=9, dt_noise=0.01)
    with pytest.raises(ValueError):
        absorbing_radii(model, noise0, noise0.path(), C_HAT)
    with pytest.raises(ValueError):
        deterministic_r11(model)


def test_sigma0_tempered_decay_slope_is_exact():
    # With sigma = 0 the decay exponent is exactly nu * lam1 for a fixed ball.
    model = ModelConfig(L=L, nu=1.0, forcing=_forcing())
    noise0 = NoiseSpec(L=L, sigma=0.0, s=1.0, seed=9, dt_noise=0.01)
    dec = class_R_decay(model, noise0, noise0.path(), C_HAT, radius=3.0, t_back=30.0)
    assert dec["slope"] == pytest.approx(2.0, rel=1e-10)
    assert dec["decays"]
    # a polynomially growing family still decays
    grow = class_R_decay(
        model, noise0, noise0.path(), C_HAT,
        radius=lambda t: 3.0 + abs(t), t_back=30.0,
    )
    assert grow["decays"]
    assert grow["values"][0] < 1e-6 * grow["values"][-1]


def test_stochastic_radii_structure(setup):
    model, noise, sim, path = setup
    display = absorbing_radii(model, noise, path, C_HAT, form="display", t_back=30.0)
    proof = absorbing_radii(model, noise, path, C_HAT, form="proof", t_back=30.0)
    hist = ou_history(model, noise, path, t_back=30.0, record_dt=0.05)
    assert display.r13 == display.r11 + display.r12
    assert display.r12 == pytest.approx(
        velocity_l2(hist["final_state"].spectrum), rel=1e-9
    )
    # the larger Gronwall constant can only inflate the bound
    assert display.r11 >= proof.r11
    assert np.isfinite(display.r11) and display.r11 > np.sqrt(2.0)


def test_radius_labels_feed_shifted_paths(setup):
    model, noise, _, path = setup
    dec = class_R_decay(
        model, noise, path, C_HAT, radius="r13",
        t_back=8.0, n_eval=3, radius_t_back=8.0,
    )
    assert dec["slope"] > 0
    assert dec["decays"]
    with pytest.raises(ValueError):
        class_R_decay(model, noise, path, C_HAT, radius="r99", t_back=4.0)


def test_pullback_cloud_contracts(setup):
    model, noise, sim, path = setup
    pb = pullback_experiment(
        sim, path, release_steps=[25, 100, 400], radius=1.0,
        n_members=6, ic_seed=0,
    )
    d = pb["diameters"]
    assert pb["monotone"]
    assert d[1] < d[0] / 5
    assert d[2] < 1e-6
    assert pb["times"] == [0.5, 2.0, 8.0]
    rad = absorbing_radii(model, noise, path, C_HAT, t_back=30.0)
    assert np.all(pb["centers"] < rad.r13)


def test_pullback_is_thread_invariant(setup):
    _, _, sim, path = setup
    kw = dict(release_steps=[25, 100], radius=1.0, n_members=5, ic_seed=1)
    serial = pullback_experiment(sim, path, threads=1, **kw)
    pooled = pullback_experiment(sim, path, threads=3, **kw)
    assert np.array_equal(serial["diameters"], pooled["diameters"])
    for a, b in zip(serial["final_cloud"], pooled["final_cloud"]):
        assert np.array_equal(a.coeffs, b.coeffs)


def test_absorption_check(setup):
    model, noise, sim, path = setup
    out = absorption_check(sim, path, ScalarSpectrum.zeros(L), 600, C_HAT)
    assert out["absorbed"]
    assert out["norm"] <= out["radius"]


def test_measure_probes_agree(setup):
    model, noise, sim, path = setup
    x0 = ScalarSpectrum.zeros(L)
    along = measure_time_average(
        sim, path, x0, n_burn=300, n_samples=150, sample_every=20
    )
    across = measure_ensemble(sim, x0, n_steps=350, n_members=30, threads=2)
    report = measure_report(along, across)
    for name, row in report.items():
        assert row["mean_rel_diff"] < 0.05, (name, row)
        assert row["hist_l1"] < 0.8, (name, row)
    a1 = measure_ensemble(sim, x0, n_steps=40, n_members=6, threads=1)
    a3 = measure_ensemble(sim, x0, n_steps=40, n_members=6, threads=3)
    assert all(np.array_equal(a1[k], a3[k]) for k in a1)


def test_validation_errors(setup):
    model, noise, sim, path = setup
    with pytest.raises(ValueError):
        ou_history(model, noise, path, t_back=4.0, record_dt=0.015)
    with pytest.raises(ValueError):
        ou_history(model, noise, path, t_back=0.0, record_dt=0.05)
    deterministic = Simulator(model, IntegratorConfig(dt=0.02))
    with pytest.raises(ValueError):
        pullback_experiment(deterministic, path, release_steps=[10])
    with pytest.raises(ValueError):
        measure_ensemble(deterministic, ScalarSpectrum.zeros(L), 10, 2)
