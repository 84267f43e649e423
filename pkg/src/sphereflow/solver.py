"""Time integration of the stochastic rotating Navier-Stokes split.

The velocity is split as u = v + z: z is the stationary Ornstein-Uhlenbeck
process carrying the noise (see noise.py), and v solves the random PDE

    dv/dt + nu A v + C v + B(u, u) = f + alpha z,        u = v + z,

which holds pathwise with continuous right-hand side, so v is integrated by
deterministic exponential schemes while z advances on the exact OU transition
in lockstep.  Adding the two equations recovers the stochastic momentum
equation (alpha cancels), so alpha is a free decomposition parameter; the
recombined u must not depend on it beyond discretization error.

The linear part Lam = nu a_l + i c_lm is diagonal on stream modes, which makes
exponential integrators exact on the stiff term: expeuler is first order,
etdrk2 second order.  Both evaluate the nonlinearity on the 3/2-rule grid.

``direct_u_oracle`` integrates u itself by semi-implicit Euler-Maruyama on the
raw Wiener increments, bypassing the OU split entirely; it is the independent
reference the split solution is tested against.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .noise import (
    NoisePath,
    NoiseSpec,
    OUState,
    mode_rates,
    ou_init_from_path,
    ou_step,
    unpack_spectrum,
)
from .operators import (
    OperatorVariant,
    coriolis_rates,
    dual_norm,
    nonlinear_tendency,
    stokes_inner,
    stokes_rates,
    trilinear_b,
)
from .spectral import (
    ScalarSpectrum,
    default_basis,
    enstrophy,
    l4_norm,
    quartic_basis,
    velocity_inner,
    velocity_l2,
)

__all__ = [
    "ModelConfig",
    "IntegratorConfig",
    "BlowupError",
    "SimState",
    "RunRecord",
    "Simulator",
    "rds_phi",
    "direct_u_oracle",
    "gronwall_constant",
    "energy_balance_residuals",
    "certificate_margins",
]


@dataclasses.dataclass(frozen=True)
class ModelConfig:
    """Physical parameters: viscosity, rotation, OU shift, and mean forcing.

    ``forcing`` holds the deterministic forcing as stream coefficients of a
    divergence-free field (None means unforced).  ``alpha`` is the OU recentre
    rate; it moves energy bookkeeping between z and v without changing u.
    """

    L: int
    nu: float
    variant: OperatorVariant = OperatorVariant.DELTA_ONLY
    Omega: float = 0.0
    alpha: float = 0.0
    forcing: ScalarSpectrum | None = None

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("model needs L >= 1")
        if self.nu <= 0:
            raise ValueError("viscosity must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.forcing is not None and self.forcing.L != self.L:
            raise ValueError("forcing degree must match model degree")

    def forcing_or_zero(self) -> ScalarSpectrum:
        if self.forcing is None:
            return ScalarSpectrum.zeros(self.L)
        return self.forcing


@dataclasses.dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    scheme: str = "etdrk2"
    nonlinearity: bool = True
    blowup_factor: float = 1e3

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("etdrk2", "expeuler"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.blowup_factor <= 1:
            raise ValueError("blowup_factor must exceed 1")


class BlowupError(RuntimeError):
    """Raised when the resolved energy grows past the runaway guard."""

    def __init__(self, t: float, norm: float):
        super().__init__(f"solution norm {norm:.3e} exceeded the guard at t = {t:.6g}")
        self.t = t
        self.norm = norm


@dataclasses.dataclass
class SimState:
    """One solver time slice: v spectrum plus the OU slice driving it."""

    t: float
    step: int
    v: ScalarSpectrum
    ou: OUState | None = None

    @property
    def z(self) -> ScalarSpectrum:
        if self.ou is None:
            return ScalarSpectrum.zeros(self.v.L)
        return self.ou.spectrum

    @property
    def u(self) -> ScalarSpectrum:
        if self.ou is None:
            return self.v
        return self.v + self.ou.spectrum


def _phi1(x: np.ndarray) -> np.ndarray:
    """(e^x - 1) / x, series below |x| = 0.01 to dodge cancellation."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 1e-2
    xs = np.where(small, x, 0.0)
    series = 1.0 + xs / 2 + xs**2 / 6 + xs**3 / 24 + xs**4 / 120 + xs**5 / 720
    xb = np.where(small, 1.0, x)
    return np.where(small, series, (np.exp(xb) - 1.0) / xb)


def _phi2(x: np.ndarray) -> np.ndarray:
    """(e^x - 1 - x) / x^2 with the matching series branch."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 1e-2
    xs = np.where(small, x, 0.0)
    series = 0.5 + xs / 6 + xs**2 / 24 + xs**3 / 120 + xs**4 / 720
    xb = np.where(small, 1.0, x)
    return np.where(small, series, (np.exp(xb) - 1.0 - xb) / xb**2)


@dataclasses.dataclass
class RunRecord:
    """Per-step diagnostics; the certificate arrays are None at level 'basic'."""

    t: np.ndarray
    energy: np.ndarray
    vnorm2: np.ndarray
    enstrophy: np.ndarray
    z_l4_4: np.ndarray
    u_l4: np.ndarray
    av_inner: np.ndarray | None = None
    b_vzv: np.ndarray | None = None
    g_inner: np.ndarray | None = None
    f_inner: np.ndarray | None = None
    g_dual2: np.ndarray | None = None
    f_dual2: np.ndarray | None = None

    BASIC_COLUMNS = ("t", "energy", "vnorm2", "enstrophy", "z_l4_4", "u_l4")
    CERTIFICATE_COLUMNS = BASIC_COLUMNS + (
        "av_inner", "b_vzv", "g_inner", "f_inner", "g_dual2", "f_dual2",
    )

    def columns(self) -> dict:
        names = self.CERTIFICATE_COLUMNS if self.av_inner is not None else self.BASIC_COLUMNS
        return {name: getattr(self, name) for name in names}


class Simulator:
    """Couples the exponential v-integrator to the exact OU substeps.

    Instances are immutable after construction and safe to share across
    threads; all evolving state lives in SimState.
    """

    def __init__(
        self,
        model: ModelConfig,
        integrator: IntegratorConfig,
        noise: NoiseSpec | None = None,
    ):
        self.model = model
        self.integrator = integrator
        self.noise = noise
        L = model.L
        if noise is not None:
            if noise.L != L:
                raise ValueError("noise degree must match model degree")
            ratio = integrator.dt / noise.dt_noise
            self.n_sub = int(round(ratio))
            if self.n_sub < 1 or abs(ratio - self.n_sub) > 1e-9:
                raise ValueError(
                    "dt must be a whole number of noise substeps "
                    f"(dt / dt_noise = {ratio})"
                )
            self.mu_pack = mode_rates(
                L, model.nu, model.variant, Omega=model.Omega, alpha=model.alpha
            )
        else:
            self.n_sub = 0
            self.mu_pack = None
        self.basis = default_basis(L)
        self.quartic = quartic_basis(L)
        a = stokes_rates(L, model.variant)
        c = coriolis_rates(L, model.Omega)
        self.rates = model.nu * a[:, None] + 1j * c
        x = -self.rates * integrator.dt
        self._decay = np.exp(x)
        self._phi1h = integrator.dt * _phi1(x)
        self._phi2h = integrator.dt * _phi2(x)
        self._f = model.forcing_or_zero()

    # -- state construction --------------------------------------------------

    def initial_state(self, u0: ScalarSpectrum, path: NoisePath | None = None) -> SimState:
        """Split u0 = v0 + z(0) with z read off the path history (v0 = u0 - z)."""
        if u0.L != self.model.L:
            raise ValueError("initial condition degree must match the model")
        if self.noise is None:
            return SimState(t=0.0, step=0, v=u0.copy())
        if path is None:
            raise ValueError("stochastic runs need a noise path")
        ou = ou_init_from_path(self.noise, self.mu_pack, path, at_step=0)
        return SimState(t=0.0, step=0, v=u0 - ou.spectrum, ou=ou)

    # -- dynamics ------------------------------------------------------------

    def nonlinear_rhs(self, v: ScalarSpectrum, z: ScalarSpectrum | None) -> ScalarSpectrum:
        """Everything outside the diagonal linear part: -B(u,u) + alpha z + f."""
        u = v if z is None else v + z
        if self.integrator.nonlinearity:
            out = nonlinear_tendency(u, self.basis).scaled(-1.0)
        else:
            out = ScalarSpectrum.zeros(self.model.L)
        if z is not None and self.model.alpha:
            out = out + z.scaled(self.model.alpha)
        if self.model.forcing is not None:
            out = out + self._f
        return out

    def step(self, state: SimState, path: NoisePath | None = None) -> SimState:
        z0 = None
        z1 = None
        ou1 = None
        if self.noise is not None:
            if path is None:
                raise ValueError("stochastic runs need a noise path")
            z0 = state.ou.spectrum
            ou1 = ou_step(state.ou, path, self.n_sub)
            z1 = ou1.spectrum
        n1 = self.nonlinear_rhs(state.v, z0)
        a = ScalarSpectrum(
            state.v.L, self._decay * state.v.coeffs + self._phi1h * n1.coeffs
        )
        if self.integrator.scheme == "etdrk2":
            n2 = self.nonlinear_rhs(a, z1)
            v_new = ScalarSpectrum(a.L, a.coeffs + self._phi2h * (n2.coeffs - n1.coeffs))
        else:
            v_new = a
        return SimState(
            t=state.t + self.integrator.dt, step=state.step + 1, v=v_new, ou=ou1
        )

    def run(
        self,
        state: SimState,
        n_steps: int,
        path: NoisePath | None = None,
        record: str | None = None,
        record_every: int = 1,
    ) -> tuple[SimState, RunRecord | None]:
        """Advance n_steps with the runaway guard; optionally collect diagnostics.

        record: None, 'basic', or 'certificate' (adds every inner product the
        energy identity needs).
        """
        if record not in (None, "basic", "certificate"):
            raise ValueError(f"unknown record level {record!r}")
        guard = self.integrator.blowup_factor * max(1.0, velocity_l2(state.v))
        rows = []
        if record:
            rows.append(self._observe(state, record))
        for _ in range(n_steps):
            state = self.step(state, path)
            norm = velocity_l2(state.v)
            if not math.isfinite(norm) or norm > guard:
                raise BlowupError(state.t, norm)
            if record and (state.step % record_every == 0):
                rows.append(self._observe(state, record))
        if record:
            names = (
                RunRecord.CERTIFICATE_COLUMNS
                if record == "certificate"
                else RunRecord.BASIC_COLUMNS
            )
            arrays = {n: np.array([r[i] for r in rows]) for i, n in enumerate(names)}
            return state, RunRecord(**arrays)
        return state, None

    def _observe(self, state: SimState, level: str) -> tuple:
        v, z, u = state.v, state.z, state.u
        basic = (
            state.t,
            0.5 * velocity_l2(u) ** 2,
            velocity_l2(v) ** 2,
            enstrophy(u),
            l4_norm(z, self.quartic) ** 4,
            l4_norm(u, self.quartic),
        )
        if level == "basic":
            return basic
        vf = self.basis.synth_velocity(stream=v)
        zf = self.basis.synth_velocity(stream=z)
        b_vzv = trilinear_b(vf, zf, vf, self.basis)
        g = z.scaled(self.model.alpha) - nonlinear_tendency(z, self.basis)
        return basic + (
            stokes_inner(v, self.model.variant),
            b_vzv,
            velocity_inner(g, v),
            velocity_inner(self._f, v),
            dual_norm(g, self.model.variant) ** 2,
            dual_norm(self._f, self.model.variant) ** 2,
        )


def rds_phi(
    sim: Simulator, path: NoisePath, x0: ScalarSpectrum, n_steps: int
) -> ScalarSpectrum:
    """The random dynamical system map: evolve x0 for n_steps along the path.

    Maps points of the (stream-coefficient) state space to points, with
    Phi(0, path) the identity by definition.  The state at local time 0 is
    split against the path's own history, so
    Phi(n + k, path) = Phi(n, path.shifted(k substeps)) o Phi(k, path) up to
    the lookback tolerance (the cocycle property).
    """
    if n_steps == 0:
        return x0.copy()
    state = sim.initial_state(x0, path)
    state, _ = sim.run(state, n_steps, path)
    return state.u


def direct_u_oracle(
    model: ModelConfig,
    noise: NoiseSpec,
    path: NoisePath,
    u0: ScalarSpectrum,
    n_steps: int,
    nonlinearity: bool = True,
) -> ScalarSpectrum:
    """Semi-implicit Euler-Maruyama on u itself, one step per noise substep.

    (1 + h Lam) u_{n+1} = u_n + h (f - B(u_n, u_n)) + G dW_n with the raw
    increments; no OU split, no alpha.  First order in h; the split solver
    must converge to this as both refine.
    """
    L = model.L
    h = noise.dt_noise
    basis = default_basis(L)
    a = stokes_rates(L, model.variant)
    c = coriolis_rates(L, model.Omega)
    denom = 1.0 + h * (model.nu * a[:, None] + 1j * c)
    f = model.forcing_or_zero()
    g_stream = noise.stream_amplitudes()
    u = u0.copy()
    for k in range(n_steps):
        rhs = u.coeffs + h * f.coeffs
        if nonlinearity:
            rhs = rhs - h * nonlinear_tendency(u, basis).coeffs
        kick = unpack_spectrum(g_stream * path.increments(k, 1)[0], L)
        u = ScalarSpectrum(L, (rhs + kick.coeffs) / denom)
    return u


# -- energy bookkeeping ------------------------------------------------------


def gronwall_constant(nu: float, c_hat: float, form: str = "display") -> float:
    """Exponent constant K in the energy bound: 27 c^4 / (4 nu^3) or /(16 nu^3).

    Both normalizations circulate for this bound; every consumer here
    evaluates the certificate under each and reports the pair.
    """
    if form == "display":
        return 27.0 * c_hat**4 / (4.0 * nu**3)
    if form == "proof":
        return 27.0 * c_hat**4 / (16.0 * nu**3)
    raise ValueError(f"unknown form {form!r}")


def energy_balance_residuals(record: RunRecord, nu: float) -> np.ndarray:
    """Defect of the pathwise energy identity on each recorded interval.

    The identity d/dt ||v||^2 = 2(-nu <Av,v> - b(v,z,v) + <g,v> + <f,v>)
    is compared against the centred difference quotient with trapezoidal
    right-hand side; for smooth (sigma = 0) runs the defect is O(dt^2).
    """
    if record.av_inner is None:
        raise ValueError("needs a record collected at level 'certificate'")
    rhs = 2.0 * (
        -nu * record.av_inner - record.b_vzv + record.g_inner + record.f_inner
    )
    dt = np.diff(record.t)
    quotient = np.diff(record.vnorm2) / dt
    return quotient - 0.5 * (rhs[1:] + rhs[:-1])


def certificate_margins(
    record: RunRecord,
    nu: float,
    lam1: float,
    K: float,
    rel_tol: float = 0.02,
    n_anchors: int = 32,
) -> dict:
    """Check the integrated energy bound along a recorded trajectory.

    For anchor times tau < t the bound reads

        ||v(t)||^2 <= ||v(tau)||^2 E(tau, t)
                      + (3/nu) int_tau^t (||g||^2 + ||f||^2)(r) E(r, t) dr,
        E(r, t) = exp( int_r^t (2 K ||z||_L4^4 - nu lam1) ),

    integrals by trapezoid on the recorded grid.  Returns the worst relative
    margin (positive = bound satisfied) and the violation count at rel_tol.
    """
    if record.av_inner is None:
        raise ValueError("needs a record collected at level 'certificate'")
    t = record.t
    n = t.size
    if n < 2:
        raise ValueError("record too short")
    rate = 2.0 * K * record.z_l4_4 - nu * lam1
    q = (3.0 / nu) * (record.g_dual2 + record.f_dual2)
    dt = np.diff(t)
    # cumulative rate integral R with R[0] = 0 (trapezoid)
    R = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * dt)])
    anchors = np.unique(np.linspace(0, n - 2, min(n_anchors, n - 1)).astype(int))
    worst = math.inf
    violations = 0
    scale = max(1.0, float(np.max(record.vnorm2)))
    for i in anchors:
        acc = 0.0  # int_tau^t q E(r, t) dr, updated while t sweeps forward
        for j in range(i + 1, n):
            e_step = math.exp(R[j] - R[j - 1])
            seg = 0.5 * (q[j - 1] * e_step + q[j]) * dt[j - 1]
            acc = acc * e_step + seg
            bound = record.vnorm2[i] * math.exp(R[j] - R[i]) + acc
            margin = (bound - record.vnorm2[j]) / scale
            worst = min(worst, margin)
            if record.vnorm2[j] > bound * (1.0 + rel_tol) + 1e-9 * scale:
                violations += 1
    return {"worst_margin": worst, "violations": violations, "anchors": anchors.size}
