"""Tests for the split stochastic solver and its energy bookkeeping."""

import math

import numpy as np
import pytest

from sphereflow.noise import NoiseSpec
from sphereflow.operators import OperatorVariant
from sphereflow.solver import (
    BlowupError,
    IntegratorConfig,
    ModelConfig,
    RunRecord,
    Simulator,
    certificate_margins,
    direct_u_oracle,
    energy_balance_residuals,
    gronwall_constant,
    rds_phi,
)
from sphereflow.spectral import ScalarSpectrum, random_stream, velocity_l2


def _mode_forcing(L, entries):
    f = ScalarSpectrum.zeros(L)
    for l, m, val in entries:
        f.set_mode(l, m, val)
    return f


def _diff(a, b):
    return float(np.max(np.abs(a.coeffs - b.coeffs)))


def test_linear_decay_is_exact():
    L = 8
    model = ModelConfig(L=L, nu=0.3, Omega=0.7)
    sim = Simulator(model, IntegratorConfig(dt=0.05, nonlinearity=False))
    u0 = random_stream(L, np.random.default_rng(0))
    fin, _ = sim.run(sim.initial_state(u0), 40)
    exact = ScalarSpectrum(L, u0.coeffs * np.exp(-sim.rates * 2.0))
    assert _diff(fin.v, exact) < 1e-14


@pytest.mark.parametrize("scheme", ["etdrk2", "expeuler"])
def test_forced_linear_closed_form(scheme):
    # With the nonlinearity off and constant forcing both schemes reproduce
    # the variation-of-constants solution exactly, every step.
    L = 8
    f = _mode_forcing(L, [(2, 1, 0.3 - 0.2j), (1, 0, 0.5)])
    model = ModelConfig(L=L, nu=0.3, Omega=0.7, forcing=f)
    sim = Simulator(model, IntegratorConfig(dt=0.05, scheme=scheme, nonlinearity=False))
    u0 = random_stream(L, np.random.default_rng(0))
    fin, _ = sim.run(sim.initial_state(u0), 40)
    lam = sim.rates
    decay = np.exp(-lam * 2.0)
    lam_safe = np.where(np.abs(lam) > 0, lam, 1.0)
    particular = np.where(np.abs(lam) > 0, f.coeffs / lam_safe, 0.0)
    exact = u0.coeffs * decay + particular * (1.0 - decay)
    assert float(np.max(np.abs(fin.v.coeffs - exact))) < 1e-13


def test_deterministic_convergence_orders():
    L = 10
    f = _mode_forcing(L, [(2, 1, 0.4 - 0.3j), (3, 0, 0.6)])
    model = ModelConfig(L=L, nu=0.2, Omega=1.0, forcing=f)
    u0 = random_stream(L, np.random.default_rng(3)).scaled(0.5)
    T = 1.0

    def final(scheme, n):
        sim = Simulator(model, IntegratorConfig(dt=T / n, scheme=scheme))
        fin, _ = sim.run(sim.initial_state(u0), n)
        return fin.v

    ref = final("etdrk2", 1024)
    for scheme, lo, hi in (("etdrk2", 1.8, 2.4), ("expeuler", 0.9, 1.6)):
        errs = [_diff(final(scheme, n), ref) for n in (16, 32, 64)]
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert lo < min(orders) and max(orders) < hi, (scheme, errs, orders)


def test_rigid_rotation_is_steady():
    # l = 1 flow: B vanishes, the curvature-shifted operator gives a_1 = 0,
    # so the full nonlinear solver must hold the state fixed.
    L = 6
    model = ModelConfig(L=L, nu=0.5, variant=OperatorVariant.DELTA_PLUS_TWO_RIC)
    sim = Simulator(model, IntegratorConfig(dt=0.05))
    u0 = _mode_forcing(L, [(1, 0, 0.8), (1, 1, 0.3 + 0.4j)])
    fin, _ = sim.run(sim.initial_state(u0), 100)
    assert _diff(fin.v, u0) < 1e-12


@pytest.fixture(scope="module")
def stochastic_setup():
    L = 8
    noise = NoiseSpec(L=L, sigma=0.3, s=1.0, seed=21, dt_noise=0.005)
    f = _mode_forcing(L, [(2, 1, 0.4 - 0.3j)])
    model = ModelConfig(L=L, nu=0.4, Omega=0.8, alpha=0.5, forcing=f)
    u0 = random_stream(L, np.random.default_rng(3)).scaled(0.5)
    return noise, model, u0


def test_cocycle_property(stochastic_setup):
    noise, model, u0 = stochastic_setup
    sim = Simulator(model, IntegratorConfig(dt=0.02), noise)
    path = noise.path()
    whole = rds_phi(sim, path, u0, 50)
    part1 = rds_phi(sim, path, u0, 20)
    part2 = rds_phi(sim, path.shifted(20 * sim.n_sub), part1, 30)
    assert _diff(whole, part2) < 1e-12
    assert np.array_equal(rds_phi(sim, path, u0, 0).coeffs, u0.coeffs)


def test_recombined_solution_ignores_alpha(stochastic_setup):
    # alpha only moves energy between z and v; u = v + z must agree across
    # alphas up to discretization error, which dies fast under refinement.
    noise, model, u0 = stochastic_setup
    path = noise.path()
    diffs = []
    for dt in (0.02, 0.005):
        n = int(round(1.0 / dt))
        us = []
        for alpha in (0.0, 2.0):
            m = ModelConfig(
                L=model.L, nu=model.nu, Omega=model.Omega, alpha=alpha,
                forcing=model.forcing,
            )
            us.append(rds_phi(Simulator(m, IntegratorConfig(dt=dt), noise), path, u0, n))
        diffs.append(velocity_l2(ScalarSpectrum(model.L, us[0].coeffs - us[1].coeffs)))
    assert diffs[1] < 1e-5
    assert diffs[0] / diffs[1] > 10


def test_split_solver_converges_to_direct_euler_maruyama():
    # Two independent discretizations of the same SDE driven by the same
    # increments: their gap must vanish at first order as both refine.
    L = 8
    T = 0.5
    u0 = random_stream(L, np.random.default_rng(3)).scaled(0.5)
    f = _mode_forcing(L, [(2, 1, 0.4 - 0.3j)])
    deltas = [1.0 / 256, 1.0 / 1024, 1.0 / 4096]
    gaps = []
    for d in deltas:
        noise = NoiseSpec(L=L, sigma=0.3, s=1.0, seed=21, dt_noise=d)
        model = ModelConfig(L=L, nu=0.4, Omega=0.8, alpha=0.5, forcing=f)
        path = noise.path()
        em = direct_u_oracle(model, noise, path, u0, int(T / d))
        sp = rds_phi(Simulator(model, IntegratorConfig(dt=d), noise), path, u0, int(T / d))
        gaps.append(velocity_l2(ScalarSpectrum(L, sp.coeffs - em.coeffs)))
    slope = math.log(gaps[0] / gaps[-1]) / math.log(deltas[0] / deltas[-1])
    assert slope > 0.9, (gaps, slope)
    assert gaps[-1] < 1e-3


def test_energy_identity_deterministic_residual():
    L = 8
    f = _mode_forcing(L, [(2, 1, 0.4 - 0.3j)])
    model = ModelConfig(L=L, nu=0.5, forcing=f)
    u0 = random_stream(L, np.random.default_rng(1)).scaled(0.8)

    def residual(dt, n):
        sim = Simulator(model, IntegratorConfig(dt=dt))
        _, rec = sim.run(sim.initial_state(u0), n, record="certificate")
        scale = np.max(np.abs(np.diff(rec.vnorm2) / np.diff(rec.t)))
        return np.max(np.abs(energy_balance_residuals(rec, model.nu))), scale

    r1, scale = residual(0.01, 400)
    r2, _ = residual(0.005, 800)
    assert r1 / scale < 0.04
    assert r1 / r2 > 3.0  # second-order defect


def test_energy_identity_stochastic_residual(stochastic_setup):
    noise, model, u0 = stochastic_setup
    path = noise.path()

    def residual(dt, n):
        sim = Simulator(model, IntegratorConfig(dt=dt), noise)
        _, rec = sim.run(sim.initial_state(u0, path), n, path, record="certificate")
        return np.max(np.abs(energy_balance_residuals(rec, model.nu)))

    assert residual(0.01, 200) / residual(0.005, 400) > 2.0


def test_certificate_margins_hold_for_both_exponents(stochastic_setup):
    noise, model, u0 = stochastic_setup
    path = noise.path()
    sim = Simulator(model, IntegratorConfig(dt=0.01), noise)
    _, rec = sim.run(sim.initial_state(u0, path), 400, path, record="certificate")
    for form in ("display", "proof"):
        K = gronwall_constant(model.nu, 0.4224, form)
        report = certificate_margins(rec, model.nu, 2.0, K)
        assert report["violations"] == 0, (form, report)
        assert report["worst_margin"] > 0


def test_gronwall_constant_values():
    assert gronwall_constant(0.5, 0.4224, "display") == pytest.approx(
        27 * 0.4224**4 / (4 * 0.125), rel=1e-14
    )
    assert gronwall_constant(0.5, 0.4224, "proof") == pytest.approx(
        27 * 0.4224**4 / (16 * 0.125), rel=1e-14
    )
    with pytest.raises(ValueError):
        gronwall_constant(0.5, 0.4224, "sharp")


def test_blowup_guard_raises():
    L = 6
    big = _mode_forcing(L, [(1, 0, 100.0)])
    model = ModelConfig(L=L, nu=0.01, forcing=big)
    sim = Simulator(model, IntegratorConfig(dt=0.05, blowup_factor=5.0))
    u0 = random_stream(L, np.random.default_rng(0)).scaled(0.1)
    with pytest.raises(BlowupError) as info:
        sim.run(sim.initial_state(u0), 2000)
    assert info.value.norm > 5.0
    assert info.value.t > 0


def test_run_record_layout(stochastic_setup):
    noise, model, u0 = stochastic_setup
    path = noise.path()
    sim = Simulator(model, IntegratorConfig(dt=0.01), noise)
    state = sim.initial_state(u0, path)
    fin, basic = sim.run(state, 20, path, record="basic", record_every=5)
    cols = basic.columns()
    assert tuple(cols) == RunRecord.BASIC_COLUMNS
    assert len(basic.t) == 5  # steps 0, 5, 10, 15, 20
    assert basic.energy[0] == pytest.approx(0.5 * velocity_l2(state.u) ** 2, rel=1e-12)
    _, cert = sim.run(sim.initial_state(u0, path), 5, path, record="certificate")
    assert tuple(cert.columns()) == RunRecord.CERTIFICATE_COLUMNS
    with pytest.raises(ValueError):
        energy_balance_residuals(basic, model.nu)
    with pytest.raises(ValueError):
        certificate_margins(basic, model.nu, 2.0, 1.0)
    with pytest.raises(ValueError):
        sim.run(sim.initial_state(u0, path), 1, path, record="everything")


def test_configuration_validation(stochastic_setup):
    noise, model, u0 = stochastic_setup
    with pytest.raises(ValueError):
        ModelConfig(L=8, nu=0.0)
    with pytest.raises(ValueError):
        ModelConfig(L=8, nu=0.4, alpha=-1.0)
    with pytest.raises(ValueError):
        ModelConfig(L=8, nu=0.4, forcing=ScalarSpectrum.zeros(5))
    with pytest.raises(ValueError):
        IntegratorConfig(dt=0.1, scheme="rk4")
    with pytest.raises(ValueError):
        IntegratorConfig(dt=-0.1)
    with pytest.raises(ValueError):
        IntegratorConfig(dt=0.1, blowup_factor=0.5)
    with pytest.raises(ValueError):
        Simulator(model, IntegratorConfig(dt=0.012), noise)  # not a substep multiple
    with pytest.raises(ValueError):
        Simulator(model, IntegratorConfig(dt=0.01), NoiseSpec(L=5, sigma=0.3, s=1.0, seed=0, dt_noise=0.005))
    sim = Simulator(model, IntegratorConfig(dt=0.01), noise)
    with pytest.raises(ValueError):
        sim.initial_state(u0)  # stochastic model needs a path
    with pytest.raises(ValueError):
        sim.step(sim.initial_state(u0, noise.path()))
    with pytest.raises(ValueError):
        sim.initial_state(ScalarSpectrum.zeros(5), noise.path())
