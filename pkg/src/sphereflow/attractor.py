"""Pullback absorbing sets, tempered decay, and invariant-measure probes.

Everything here evaluates the long-time objects of the random system at the
observation time 0: trajectories are released further and further in the past
along one fixed noise path (the pullback limit), while the OU machinery
supplies the z-history those estimates integrate over.

The absorbing radii come from the integrated energy bound.  With
rate(t) = 2 K ||z(t)||_L4^4 - nu lam_1 and E(t) = exp(int_t^0 rate),

    r11^2 = 2 + sup_{s <= 0} [ 2 ||z(s)||^2 E(s)
                               + (3/nu) int_s^0 (||g||^2 + ||f||^2) E ],

with g = alpha z - B(z, z) measured in the dual norm; r12 = ||z(0)||, and
r13 = r11 + r12 bounds the full velocity u = v + z.  K carries the usual
constant ambiguity, so every entry point takes form = 'display' or 'proof'
(see solver.gronwall_constant).
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import math

import numpy as np

from .noise import NoisePath, NoiseSpec, ou_init_from_path, ou_step
from .operators import dual_norm, nonlinear_tendency, variant_lambda1
from .solver import ModelConfig, Simulator, gronwall_constant, rds_phi
from .spectral import (
    ScalarSpectrum,
    default_basis,
    enstrophy,
    l4_norm,
    quartic_basis,
    random_stream,
    velocity_l2,
)

__all__ = [
    "AbsorbingRadii",
    "ou_history",
    "absorbing_radii",
    "deterministic_r11",
    "class_R_decay",
    "pullback_experiment",
    "absorption_check",
    "measure_time_average",
    "measure_ensemble",
    "measure_report",
    "default_observables",
]


def _coercivity(model: ModelConfig) -> float:
    lam1 = variant_lambda1(model.variant)
    if lam1 <= 0:
        raise ValueError(
            "absorbing estimates need the coercive dissipation variant "
            "(the curvature-shifted operator leaves l = 1 undamped)"
        )
    return lam1


def ou_history(
    model: ModelConfig,
    noise: NoiseSpec,
    path: NoisePath,
    t_back: float,
    record_dt: float,
) -> dict:
    """March z over [-t_back, 0] and record the certificate ingredients.

    Returns arrays on the record grid: t, z2 = ||z||^2, z44 = ||z||_L4^4,
    g_dual2, plus the constant f_dual2 and the final OU state (time 0).
    """
    ratio = record_dt / noise.dt_noise
    n_sub = int(round(ratio))
    if n_sub < 1 or abs(ratio - n_sub) > 1e-9:
        raise ValueError("record_dt must be a whole number of noise substeps")
    n_rec = int(round(t_back / record_dt))
    if n_rec < 1:
        raise ValueError("t_back must cover at least one record step")
    from .noise import mode_rates

    mu = mode_rates(model.L, model.nu, model.variant, Omega=model.Omega, alpha=model.alpha)
    state = ou_init_from_path(noise, mu, path, at_step=-n_rec * n_sub)
    basis = default_basis(model.L)
    quartic = quartic_basis(model.L)
    t = np.empty(n_rec + 1)
    z2 = np.empty(n_rec + 1)
    z44 = np.empty(n_rec + 1)
    g_dual2 = np.empty(n_rec + 1)
    for j in range(n_rec + 1):
        z = state.spectrum
        t[j] = -t_back + j * record_dt
        z2[j] = velocity_l2(z) ** 2
        z44[j] = l4_norm(z, quartic) ** 4
        g = z.scaled(model.alpha) - nonlinear_tendency(z, basis)
        g_dual2[j] = dual_norm(g, model.variant) ** 2
        if j < n_rec:
            state = ou_step(state, path, n_sub)
    f_dual2 = dual_norm(model.forcing_or_zero(), model.variant) ** 2
    return {
        "t": t,
        "z2": z2,
        "z44": z44,
        "g_dual2": g_dual2,
        "f_dual2": f_dual2,
        "final_state": state,
    }


@dataclasses.dataclass(frozen=True)
class AbsorbingRadii:
    r11: float
    r12: float
    r13: float
    form: str
    sup_at: float
    t_back: float


def _radii_from_history(
    hist: dict, model: ModelConfig, c_hat: float, form: str
) -> AbsorbingRadii:
    lam1 = _coercivity(model)
    K = gronwall_constant(model.nu, c_hat, form)
    t = hist["t"]
    rate = 2.0 * K * hist["z44"] - model.nu * lam1
    q = (3.0 / model.nu) * (hist["g_dual2"] + hist["f_dual2"])
    dt = np.diff(t)
    R = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * dt)])
    # E_j = exp(int_{t_j}^0 rate) = exp(R[-1] - R[j]), capped against overflow
    E = np.exp(np.minimum(R[-1] - R, 700.0))
    w = q * E
    tail = np.concatenate(
        [np.cumsum((0.5 * (w[1:] + w[:-1]) * dt)[::-1])[::-1], [0.0]]
    )
    candidate = 2.0 * hist["z2"] * E + tail
    j = int(np.argmax(candidate))
    r11 = math.sqrt(2.0 + float(candidate[j]))
    r12 = math.sqrt(float(hist["z2"][-1]))
    return AbsorbingRadii(
        r11=r11,
        r12=r12,
        r13=r11 + r12,
        form=form,
        sup_at=float(t[j]),
        t_back=float(-t[0]),
    )


def absorbing_radii(
    model: ModelConfig,
    noise: NoiseSpec,
    path: NoisePath,
    c_hat: float,
    form: str = "display",
    t_back: float = 40.0,
    record_dt: float = 0.05,
) -> AbsorbingRadii:
    """Absorbing-set radii at time 0 for the given path realization."""
    _coercivity(model)
    hist = ou_history(model, noise, path, t_back, record_dt)
    return _radii_from_history(hist, model, c_hat, form)


def deterministic_r11(model: ModelConfig) -> float:
    """Closed form of r11 when sigma = 0: sqrt(2 + 3 ||f||^2 / (nu^2 lam1))."""
    lam1 = _coercivity(model)
    f2 = dual_norm(model.forcing_or_zero(), model.variant) ** 2
    return math.sqrt(2.0 + 3.0 * f2 / (model.nu**2 * lam1))


def class_R_decay(
    model: ModelConfig,
    noise: NoiseSpec,
    path: NoisePath,
    c_hat: float,
    radius,
    form: str = "display",
    t_back: float = 30.0,
    record_dt: float = 0.05,
    n_eval: int = 9,
    radius_t_back: float = 20.0,
) -> dict:
    """Check E(t) rho(t)^2 -> 0 into the past: attraction of a tempered family.

    radius may be a number (fixed ball), a callable t -> rho(t), or one of
    'r11' / 'r12' / 'r13', which re-evaluates that absorbing radius on the
    time-shifted path at each probe time (the radii seen from time t).
    Returns the probe values, the fitted exponential slope of log d against t,
    and whether the earliest probe has decayed below the latest.
    """
    lam1 = _coercivity(model)
    hist = ou_history(model, noise, path, t_back, record_dt)
    K = gronwall_constant(model.nu, c_hat, form)
    t = hist["t"]
    rate = 2.0 * K * hist["z44"] - model.nu * lam1
    dt = np.diff(t)
    R = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * dt)])
    idx = np.unique(np.linspace(0, t.size - 1, n_eval).astype(int))
    t_eval = t[idx]
    if isinstance(radius, str):
        if radius not in ("r11", "r12", "r13"):
            raise ValueError(f"unknown radius label {radius!r}")
        sub_per_record = int(round(record_dt / noise.dt_noise))
        rho = []
        for j in idx:
            shift = int(round((j - (t.size - 1)) * sub_per_record))
            radii = absorbing_radii(
                model, noise, path.shifted(shift), c_hat,
                form=form, t_back=radius_t_back, record_dt=record_dt,
            )
            rho.append(getattr(radii, radius))
        rho = np.asarray(rho)
    elif callable(radius):
        rho = np.asarray([float(radius(tv)) for tv in t_eval])
    else:
        rho = np.full(t_eval.shape, float(radius))
    d = np.exp(np.minimum(R[-1] - R[idx], 700.0)) * rho**2
    slope = float(np.polyfit(t_eval, np.log(np.maximum(d, 1e-300)), 1)[0])
    return {
        "t": t_eval,
        "values": d,
        "slope": slope,
        "decays": bool(d[0] < d[-1]),
        "form": form,
    }


# -- pullback experiments on the full solver ---------------------------------


def _spread_initial_conditions(L: int, radius: float, n: int, seed: int):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        x = random_stream(L, rng)
        out.append(x.scaled(radius / velocity_l2(x)))
    return out


def _cloud_diameter(cloud) -> float:
    worst = 0.0
    for i in range(len(cloud)):
        for j in range(i + 1, len(cloud)):
            gap = ScalarSpectrum(cloud[i].L, cloud[i].coeffs - cloud[j].coeffs)
            worst = max(worst, velocity_l2(gap))
    return worst


def pullback_experiment(
    sim: Simulator,
    path: NoisePath,
    release_steps,
    radius: float = 1.0,
    n_members: int = 8,
    ic_seed: int = 0,
    threads: int = 1,
) -> dict:
    """Release a fixed cloud of states ever deeper in the past; measure at 0.

    For each horizon n in release_steps, every member x_i is evolved by
    Phi(n, theta_{-n} path) x_i -- same path, same targets, longer lead-in.
    Convergence of the cloud diameter to 0 exhibits the pullback attractor
    section at time 0.
    """
    if sim.noise is None:
        raise ValueError("pullback experiments need a stochastic simulator")
    ics = _spread_initial_conditions(sim.model.L, radius, n_members, ic_seed)
    release_steps = sorted(int(n) for n in release_steps)
    diameters = []
    centers = []
    final_cloud = None
    for n in release_steps:
        shifted = path.shifted(-n * sim.n_sub)

        def evolve(x, n=n, shifted=shifted):
            return rds_phi(sim, shifted, x, n)

        if threads > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
                cloud = list(pool.map(evolve, ics))
        else:
            cloud = [evolve(x) for x in ics]
        diameters.append(_cloud_diameter(cloud))
        mean = np.mean([u.coeffs for u in cloud], axis=0)
        centers.append(velocity_l2(ScalarSpectrum(sim.model.L, mean)))
        final_cloud = cloud
    dims = np.asarray(diameters)
    return {
        "release_steps": release_steps,
        "times": [n * sim.integrator.dt for n in release_steps],
        "diameters": dims,
        "centers": np.asarray(centers),
        "monotone": bool(np.all(np.diff(dims) <= 1e-12 + 0.05 * dims[:-1])),
        "final_cloud": final_cloud,
    }


def absorption_check(
    sim: Simulator,
    path: NoisePath,
    x0: ScalarSpectrum,
    release_steps: int,
    c_hat: float,
    form: str = "display",
    t_back: float = 40.0,
) -> dict:
    """Is the pullback-evolved state inside the r13 ball at time 0?"""
    radii = absorbing_radii(
        sim.model, sim.noise, path, c_hat, form=form, t_back=t_back,
        record_dt=sim.integrator.dt,
    )
    u0 = rds_phi(sim, path.shifted(-release_steps * sim.n_sub), x0, release_steps)
    norm = velocity_l2(u0)
    return {
        "norm": norm,
        "radius": radii.r13,
        "absorbed": bool(norm <= radii.r13),
        "radii": radii,
    }


# -- invariant-measure probes ------------------------------------------------


def default_observables(quartic) -> dict:
    return {
        "energy": lambda u: 0.5 * velocity_l2(u) ** 2,
        "enstrophy": enstrophy,
        "l4": lambda u: l4_norm(u, quartic),
    }


def measure_time_average(
    sim: Simulator,
    path: NoisePath,
    x0: ScalarSpectrum,
    n_burn: int,
    n_samples: int,
    sample_every: int,
    observables: dict | None = None,
) -> dict:
    """Observable samples along one trajectory after burn-in (Birkhoff side)."""
    if observables is None:
        observables = default_observables(sim.quartic)
    state = sim.initial_state(x0, path)
    state, _ = sim.run(state, n_burn, path)
    out = {name: np.empty(n_samples) for name in observables}
    for i in range(n_samples):
        u = state.u
        for name, fn in observables.items():
            out[name][i] = fn(u)
        state, _ = sim.run(state, sample_every, path)
    return out


def measure_ensemble(
    sim: Simulator,
    x0: ScalarSpectrum,
    n_steps: int,
    n_members: int,
    observables: dict | None = None,
    base_member: int = 0,
    threads: int = 1,
) -> dict:
    """One sample per independent realization after the same spin-up time."""
    if sim.noise is None:
        raise ValueError("ensemble sampling needs a stochastic simulator")
    if observables is None:
        observables = default_observables(sim.quartic)

    def one(i: int):
        path = sim.noise.path(member=base_member + i)
        state = sim.initial_state(x0, path)
        state, _ = sim.run(state, n_steps, path)
        u = state.u
        return [fn(u) for fn in observables.values()]

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(n_members)))
    else:
        rows = [one(i) for i in range(n_members)]
    table = np.asarray(rows)
    return {name: table[:, j] for j, name in enumerate(observables)}


def measure_report(along: dict, across: dict, bins: int = 16) -> dict:
    """Compare the two samplings observable by observable.

    hist_l1 is the L1 distance between normalized histograms on shared edges
    (0 identical, 2 disjoint).
    """
    report = {}
    for name in along:
        a, b = np.asarray(along[name]), np.asarray(across[name])
        lo = min(a.min(), b.min())
        hi = max(a.max(), b.max())
        if hi <= lo:
            hi = lo + 1e-12
        edges = np.linspace(lo, hi, bins + 1)
        pa, _ = np.histogram(a, bins=edges)
        pb, _ = np.histogram(b, bins=edges)
        scale = max(abs(a.mean()), abs(b.mean()), 1e-300)
        report[name] = {
            "mean_along": float(a.mean()),
            "mean_across": float(b.mean()),
            "mean_rel_diff": float(abs(a.mean() - b.mean()) / scale),
            "std_along": float(a.std()),
            "std_across": float(b.std()),
            "hist_l1": float(
                np.abs(pa / a.size - pb / b.size).sum()
            ),
        }
    return report
