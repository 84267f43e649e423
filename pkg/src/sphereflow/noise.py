"""Stochastic forcing: counter-based noise paths and Ornstein-Uhlenbeck modes.

The forcing is diagonal in the spherical-harmonic velocity basis: mode (l, m)
is driven with amplitude ``g_l = sigma * lam_l**(-s)`` (velocity level), where
``lam_l = l (l + 1)``.  The mean-zero l = 0 mode is never forced.  States are
stored as *stream-function* coefficients, so the stream-level amplitude is
``g_l / sqrt(lam_l)``.

Noise increments come from a counter-based generator so a path is a pure
function of ``(seed, l, m, substep, member)``.  This gives three properties the
time-shift machinery needs: any increment can be regenerated without replaying
the path, the two-sided time axis ``k in Z`` is directly addressable, and a
shifted path is just an index offset.  The generator is the splitmix64 chain

    hstar = mix64(h + i * PHI + field_i)     (one link per counter field)

with ``PHI = 0x9E3779B97F4A7C15`` and ``mix64`` the xorshift-multiply
finalizer ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
z *= 0x94D049BB133111EB; z ^= z >> 31`` (all mod 2**64).  The chain order is
seed -> l -> m -> zigzag(k) -> member, with ``zigzag(k) = 2k`` for ``k >= 0``
and ``-2k - 1`` otherwise; two output words use fields 5 and 6.  Gaussians are
Box-Muller with ``u1 = ((w0 >> 11) + 1) * 2**-53`` (never zero) and
``u2 = (w1 >> 11) * 2**-53``.

Only m >= 0 is ever drawn.  Negative orders are slaved to the reality
constraint ``dW_{l,-m} = (-1)**m conj(dW_{l,m})``; the m = 0 increment is real
with variance dt, and for m > 0 the real and imaginary parts each carry
variance dt / 2.
"""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np

from .operators import OperatorVariant, coriolis_rates, stokes_rates, variant_lambda1
from .spectral import ScalarSpectrum, SpectralBasis, norms

__all__ = [
    "PHI",
    "RADONIFYING_TAIL_TOL",
    "RoughNoiseWarning",
    "mix64",
    "zigzag_encode",
    "packed_orders",
    "pack_size",
    "pack_spectrum",
    "unpack_spectrum",
    "NoiseSpec",
    "NoisePath",
    "mode_rates",
    "radonifying_report",
    "OUState",
    "ou_init_stationary",
    "ou_init_from_path",
    "ou_step",
    "x_norm",
    "sln_time_average",
    "mc_x4_moment",
    "h4_moment_analytic",
    "alpha_threshold_probe",
]

_MASK = (1 << 64) - 1
PHI = 0x9E3779B97F4A7C15
_MULT_1 = 0xBF58476D1CE4E5B9
_MULT_2 = 0x94D049BB133111EB

#: Relative weight of the last decade of degrees below which the truncated
#: covariance sums are accepted as Cauchy (see ``radonifying_report``).
RADONIFYING_TAIL_TOL = 0.05


class RoughNoiseWarning(UserWarning):
    """Forcing too rough for the well-posedness theory (s <= 1/2)."""


def mix64(h: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer on uint64 arrays (wraps mod 2**64)."""
    with np.errstate(over="ignore"):
        h = h.astype(np.uint64, copy=True)
        h ^= h >> np.uint64(30)
        h *= np.uint64(_MULT_1)
        h ^= h >> np.uint64(27)
        h *= np.uint64(_MULT_2)
        h ^= h >> np.uint64(31)
    return h


def zigzag_encode(k: np.ndarray | int):
    """Map signed step indices to non-negative counters: 0,-1,1,-2,... -> 0,1,2,3,..."""
    k = np.asarray(k, dtype=np.int64)
    out = np.where(k >= 0, 2 * k, -2 * k - 1).astype(np.uint64)
    return out


def _chain(h: np.ndarray, link: int, field: np.ndarray | int) -> np.ndarray:
    """One link of the counter chain: mix64(h + link*PHI + field)."""
    step = np.uint64((link * PHI) & _MASK)
    with np.errstate(over="ignore"):
        return mix64(h + step + np.asarray(field, dtype=np.uint64))


def packed_orders(L: int) -> tuple[np.ndarray, np.ndarray]:
    """Degree/order arrays for the one-sided mode pack: l = 1..L, m = 0..l."""
    ells = np.concatenate([np.full(l + 1, l, dtype=np.int64) for l in range(1, L + 1)])
    ms = np.concatenate([np.arange(l + 1, dtype=np.int64) for l in range(1, L + 1)])
    return ells, ms


def pack_size(L: int) -> int:
    return L * (L + 3) // 2


def pack_spectrum(spec: ScalarSpectrum) -> np.ndarray:
    """Extract the m >= 0, l >= 1 coefficients as a flat complex vector."""
    ells, ms = packed_orders(spec.L)
    return spec.coeffs[ells, ms + spec.L].copy()


def unpack_spectrum(z_pack: np.ndarray, L: int) -> ScalarSpectrum:
    """Rebuild a full spectrum from a pack, filling m < 0 by conjugate symmetry."""
    ells, ms = packed_orders(L)
    coeffs = np.zeros((L + 1, 2 * L + 1), dtype=np.complex128)
    coeffs[ells, ms + L] = z_pack
    pos = ms > 0
    sign = np.where(ms[pos] % 2 == 0, 1.0, -1.0)
    coeffs[ells[pos], L - ms[pos]] = sign * np.conj(z_pack[pos])
    return ScalarSpectrum(L, coeffs)


@dataclasses.dataclass(frozen=True)
class NoiseSpec:
    """Forcing shape: amplitude sigma * lam^(-s) on every velocity mode l >= 1.

    ``dt_noise`` is the substep of the piecewise-constant increment process;
    integrators must advance the OU state on this clock.
    """

    L: int
    sigma: float
    s: float
    seed: int
    dt_noise: float

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("noise needs at least degree L = 1")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.dt_noise <= 0:
            raise ValueError("dt_noise must be positive")
        if self.sigma > 0 and self.s <= 0.5:
            warnings.warn(
                f"s = {self.s} <= 1/2: the mode sums defining the forcing "
                "do not converge as L grows; results are truncation artifacts",
                RoughNoiseWarning,
                stacklevel=2,
            )

    def velocity_amplitudes(self) -> np.ndarray:
        """g_l = sigma * lam_l**(-s) per packed mode (velocity level)."""
        ells, _ = packed_orders(self.L)
        lam = (ells * (ells + 1)).astype(float)
        return self.sigma * lam ** (-self.s)

    def stream_amplitudes(self) -> np.ndarray:
        """Amplitudes acting on stream coefficients: g_l / sqrt(lam_l)."""
        ells, _ = packed_orders(self.L)
        lam = (ells * (ells + 1)).astype(float)
        return self.sigma * lam ** (-self.s - 0.5)

    def path(self, shift_offset: int = 0, member: int = 0) -> "NoisePath":
        return NoisePath(
            seed=self.seed,
            dt_noise=self.dt_noise,
            L=self.L,
            shift_offset=shift_offset,
            member=member,
        )


@dataclasses.dataclass(frozen=True)
class NoisePath:
    """Addressable two-sided Wiener increment sequence for every packed mode.

    Local substep k of this path reads counter ``shift_offset + k``, so
    ``shifted(n)`` implements the time shift of the driving noise exactly:
    the shifted path's local step 0 is the base path's step n.  ``member``
    selects an independent ensemble realization under the same seed.
    """

    seed: int
    dt_noise: float
    L: int
    shift_offset: int = 0
    member: int = 0

    def __post_init__(self):
        if self.dt_noise <= 0:
            raise ValueError("dt_noise must be positive")
        ells, ms = packed_orders(self.L)
        h = np.full(ells.shape, self.seed & _MASK, dtype=np.uint64)
        h = _chain(h, 1, ells.astype(np.uint64))
        h = _chain(h, 2, ms.astype(np.uint64))
        object.__setattr__(self, "_h_mode", h)
        object.__setattr__(self, "_ells", ells)
        object.__setattr__(self, "_ms", ms)

    def shifted(self, n_substeps: int) -> "NoisePath":
        return dataclasses.replace(self, shift_offset=self.shift_offset + n_substeps)

    def gaussians(self, k0: int, n: int) -> np.ndarray:
        """Standard-normal pairs for local substeps k0..k0+n-1: shape (n, pack, 2)."""
        k_abs = self.shift_offset + k0 + np.arange(n, dtype=np.int64)
        zz = zigzag_encode(k_abs)
        h = _chain(self._h_mode[None, :], 3, zz[:, None])
        h = _chain(h, 4, np.uint64(self.member & _MASK))
        w0 = _chain(h, 5, np.uint64(0))
        w1 = _chain(h, 6, np.uint64(0))
        u1 = (((w0 >> np.uint64(11)) + np.uint64(1)).astype(np.float64)) * 2.0**-53
        u2 = ((w1 >> np.uint64(11)).astype(np.float64)) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        ang = (2.0 * np.pi) * u2
        return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=-1)

    def increments(self, k0: int, n: int) -> np.ndarray:
        """Wiener increments over [k dt, (k+1) dt) for the packed m >= 0 modes.

        Complex (n, pack); m = 0 entries are real with variance dt, m > 0
        entries are complex with total variance dt.
        """
        g = self.gaussians(k0, n)
        root = math.sqrt(self.dt_noise)
        half = math.sqrt(self.dt_noise / 2.0)
        dw = half * (g[..., 0] + 1j * g[..., 1])
        m0 = self._ms == 0
        dw[:, m0] = root * g[:, m0, 0]
        return dw

    def increment_spectrum(self, k: int) -> ScalarSpectrum:
        """Full two-sided increment at substep k (m < 0 by conjugate symmetry)."""
        return unpack_spectrum(self.increments(k, 1)[0], self.L)


def mode_rates(
    L: int,
    nu: float,
    variant: OperatorVariant,
    Omega: float = 0.0,
    alpha: float = 0.0,
) -> np.ndarray:
    """Per-packed-mode OU decay rates mu = nu * a_l + i * c_lm + alpha."""
    ells, ms = packed_orders(L)
    a = stokes_rates(L, variant)
    c = coriolis_rates(L, Omega)
    return nu * a[ells] + 1j * c[ells, ms + L] + alpha


def radonifying_report(s: float, L_max: int = 10_000) -> dict:
    """Truncated Hilbert-Schmidt sums of the forcing covariance, with a Cauchy check.

    The degree-l shell contributes ``(2l + 1) * lam_l**(-2s)`` (unit sigma).
    The sequence of truncations is accepted as Cauchy when the last decade of
    degrees contributes under ``RADONIFYING_TAIL_TOL`` of the total.
    """
    if L_max < 10:
        raise ValueError("need L_max >= 10 to compare against L_max // 10")
    l = np.arange(1, L_max + 1, dtype=float)
    terms = (2.0 * l + 1.0) * (l * (l + 1.0)) ** (-2.0 * s)
    partial = np.cumsum(terms)
    total = partial[-1]
    tail_fraction = (total - partial[L_max // 10 - 1]) / total
    return {
        "s": s,
        "L_max": L_max,
        "sum": total,
        "tail_fraction": tail_fraction,
        "converged": bool(tail_fraction < RADONIFYING_TAIL_TOL),
    }


def _kick_weights(mu: np.ndarray, dt: float) -> np.ndarray:
    """Exact variance factor w with Var[e-weighted integral] = w**2 * dt.

    w**2 = (1 - exp(-2 Re mu dt)) / (2 Re mu dt), continuous at Re mu = 0.
    """
    x = mu.real * dt
    with np.errstate(divide="ignore", invalid="ignore"):
        w2 = np.where(x > 0, -np.expm1(-2.0 * x) / (2.0 * x), 1.0)
    return np.sqrt(w2)


@dataclasses.dataclass(frozen=True)
class OUState:
    """One time slice of the diagonal OU process, in stream coefficients.

    ``step_index`` counts noise substeps from the *local* origin of the path
    that drives the state, so time is ``step_index * dt_noise`` on that
    path's clock.
    """

    L: int
    dt_noise: float
    step_index: int
    z_pack: np.ndarray
    mu_pack: np.ndarray
    g_stream: np.ndarray

    @property
    def time(self) -> float:
        return self.step_index * self.dt_noise

    @property
    def spectrum(self) -> ScalarSpectrum:
        return unpack_spectrum(self.z_pack, self.L)

    def stationary_velocity_variance(self) -> np.ndarray:
        """Per-packed-mode E|u_hat|^2 = g^2 / (2 Re mu) at velocity level."""
        ells, _ = packed_orders(self.L)
        lam = (ells * (ells + 1)).astype(float)
        g_vel = self.g_stream * np.sqrt(lam)
        re = self.mu_pack.real
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.where(g_vel > 0, g_vel**2 / (2.0 * re), 0.0)
        return v


def _check_driven_rates(mu: np.ndarray, g: np.ndarray) -> float:
    driven = g > 0
    if not np.any(driven):
        return math.inf
    re_min = float(np.min(mu.real[driven]))
    if re_min <= 0:
        raise ValueError(
            "stationary OU needs Re mu > 0 on every driven mode; "
            f"min Re mu = {re_min}"
        )
    return re_min


def ou_init_stationary(
    spec: NoiseSpec, mu_pack: np.ndarray, rng: np.random.Generator
) -> OUState:
    """Draw the stationary law directly (one-off sampling, not path-coupled)."""
    g = spec.stream_amplitudes()
    _check_driven_rates(mu_pack, g)
    _, ms = packed_orders(spec.L)
    with np.errstate(divide="ignore", invalid="ignore"):
        var = np.where(g > 0, g**2 / (2.0 * mu_pack.real), 0.0)
    x = rng.standard_normal(g.shape)
    y = rng.standard_normal(g.shape)
    z = np.sqrt(var / 2.0) * (x + 1j * y)
    m0 = ms == 0
    z[m0] = np.sqrt(var[m0]) * x[m0]
    return OUState(
        L=spec.L,
        dt_noise=spec.dt_noise,
        step_index=0,
        z_pack=z,
        mu_pack=mu_pack.copy(),
        g_stream=g,
    )


def ou_init_from_path(
    spec: NoiseSpec,
    mu_pack: np.ndarray,
    path: NoisePath,
    at_step: int = 0,
    tol: float = 1e-17,
    block: int = 4096,
) -> OUState:
    """Stationary state at a path substep, as a function of the path history.

    Sums the exact mode recursion over a finite lookback window chosen so the
    discarded past is damped below ``tol``; two calls that look at overlapping
    histories of the same path therefore agree to that tolerance, which is
    what makes time-shifted evaluations consistent with evolved ones.
    """
    if spec.L != path.L or spec.dt_noise != path.dt_noise:
        raise ValueError("path and noise spec disagree on L or dt_noise")
    g = spec.stream_amplitudes()
    re_min = _check_driven_rates(mu_pack, g)
    z = np.zeros(g.shape, dtype=np.complex128)
    if np.isfinite(re_min):
        n_back = int(math.ceil(math.log(1.0 / tol) / (re_min * spec.dt_noise)))
        if n_back > 5_000_000:
            raise ValueError(
                f"lookback window of {n_back} substeps is impractical; "
                "increase dt_noise, alpha, or the dissipation"
            )
        decay = np.exp(-mu_pack * spec.dt_noise)
        kick = g * _kick_weights(mu_pack, spec.dt_noise)
        k = at_step - n_back
        while k < at_step:
            n = min(block, at_step - k)
            dw = path.increments(k, n)
            for j in range(n):
                z = decay * z + kick * dw[j]
            k += n
    return OUState(
        L=spec.L,
        dt_noise=spec.dt_noise,
        step_index=at_step,
        z_pack=z,
        mu_pack=mu_pack.copy(),
        g_stream=g,
    )


def ou_step(
    state: OUState, path: NoisePath, n_substeps: int = 1, block: int = 4096
) -> OUState:
    """Advance the OU state by whole noise substeps with the exact update.

    Each substep applies ``z <- exp(-mu dt) z + g w dW`` where w makes the
    one-step variance exact, so the discrete chain has the continuous-time
    transition law at the substep times.
    """
    if n_substeps < 0:
        raise ValueError("cannot step backwards")
    if state.L != path.L or state.dt_noise != path.dt_noise:
        raise ValueError("path and state disagree on L or dt_noise")
    decay = np.exp(-state.mu_pack * state.dt_noise)
    kick = state.g_stream * _kick_weights(state.mu_pack, state.dt_noise)
    z = state.z_pack.copy()
    k = state.step_index
    end = state.step_index + n_substeps
    while k < end:
        n = min(block, end - k)
        dw = path.increments(k, n)
        for j in range(n):
            z = decay * z + kick * dw[j]
        k += n
    return dataclasses.replace(state, step_index=end, z_pack=z)


def x_norm(stream: ScalarSpectrum, quartic_basis: SpectralBasis) -> float:
    """Norm used for the moment probes: L2 plus L4 of the velocity field."""
    n = norms(stream, quartic_basis)
    return n["l2"] + n["l4"]


def sln_time_average(
    state: OUState,
    path: NoisePath,
    quartic_basis: SpectralBasis,
    n_samples: int,
    sample_every: int,
) -> dict:
    """Time average of |z|_X^4 along one trajectory (strong-law probe).

    Samples every ``sample_every`` substeps, left-endpoint rule.  Returns the
    running state so callers can extend the same trajectory.
    """
    samples = np.empty(n_samples)
    for i in range(n_samples):
        samples[i] = x_norm(state.spectrum, quartic_basis) ** 4
        state = ou_step(state, path, sample_every)
    return {
        "mean": float(samples.mean()),
        "samples": samples,
        "final_state": state,
    }


def mc_x4_moment(
    spec: NoiseSpec,
    mu_pack: np.ndarray,
    quartic_basis: SpectralBasis,
    n_samples: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo E|z|_X^4 over independent stationary draws."""
    total = 0.0
    for _ in range(n_samples):
        state = ou_init_stationary(spec, mu_pack, rng)
        total += x_norm(state.spectrum, quartic_basis) ** 4
    return total / n_samples


def h4_moment_analytic(spec: NoiseSpec, mu_pack: np.ndarray) -> float:
    """Closed-form E |z|_H^4 for the stationary Gaussian law.

    |z|_H^2 is a weighted sum of independent chi-square variables: each m = 0
    mode contributes v * chi2(1), each m > 0 conjugate pair v * chi2(2) with
    v the per-mode velocity variance, so the fourth moment is
    (sum of means)^2 + sum of variances.
    """
    g_vel = spec.velocity_amplitudes()
    _check_driven_rates(mu_pack, g_vel)
    _, ms = packed_orders(spec.L)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(g_vel > 0, g_vel**2 / (2.0 * mu_pack.real), 0.0)
    dof = np.where(ms == 0, 1.0, 2.0)
    mean = np.sum(v * dof)
    var = np.sum(2.0 * dof * v**2)
    return float(mean**2 + var)


def alpha_threshold_probe(
    spec: NoiseSpec,
    nu: float,
    variant: OperatorVariant,
    alphas,
    c_hat: float,
    quartic_basis: SpectralBasis,
    n_samples: int = 200,
    Omega: float = 0.0,
    seed: int = 0,
) -> list[dict]:
    """Estimate E|z_alpha|_X^4 against the small-moment threshold, per alpha.

    The smallness condition asks for the fourth moment to sit below
    ``8 nu^4 lam_1 / (27 c_hat^4)``.  All alphas reuse one batch of standard
    normals (common random numbers), so the estimated moment is exactly
    monotone in alpha and the crossing is crisp.
    """
    lam1 = variant_lambda1(variant)
    if lam1 <= 0:
        raise ValueError("threshold needs a coercive dissipation (lam_1 > 0)")
    threshold = 8.0 * nu**4 * lam1 / (27.0 * c_hat**4)
    g = spec.stream_amplitudes()
    _, ms = packed_orders(spec.L)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_samples, g.size))
    y = rng.standard_normal((n_samples, g.size))
    m0 = ms == 0
    rows = []
    for alpha in alphas:
        mu = mode_rates(spec.L, nu, variant, Omega=Omega, alpha=float(alpha))
        _check_driven_rates(mu, g)
        with np.errstate(divide="ignore", invalid="ignore"):
            var = np.where(g > 0, g**2 / (2.0 * mu.real), 0.0)
        z = np.sqrt(var / 2.0)[None, :] * (x + 1j * y)
        z[:, m0] = np.sqrt(var[m0])[None, :] * x[:, m0]
        total = 0.0
        for i in range(n_samples):
            total += x_norm(unpack_spectrum(z[i], spec.L), quartic_basis) ** 4
        moment = total / n_samples
        rows.append(
            {
                "alpha": float(alpha),
                "moment": moment,
                "threshold": threshold,
                "below": bool(moment < threshold),
            }
        )
    return rows
