"""Scalar spherical-harmonic spectra and the tangent-field calculus built on them.

Conventions (fixed throughout the package):

* Fully normalized complex harmonics with Condon-Shortley phase,
  Y_lm(theta, phi) = Pbar_lm(cos theta) e^{i m phi} / sqrt(2 pi), where the
  Pbar_lm are orthonormal on [-1, 1].  Then Int Y_lm conj(Y_l'm') dS =
  delta_ll' delta_mm', Y_00 = 1/sqrt(4 pi), and sum_m |Y_lm|^2 = (2l+1)/(4 pi).
* Real fields satisfy c_{l,-m} = (-1)^m conj(c_{l,m}).
* Surface gradient: grad f = (df/dtheta, (1/sin) df/dphi) in (e_theta, e_phi)
  components.  Curl f = x_hat x grad f = (-(1/sin) df/dphi, df/dtheta) is the
  tangential rotation of grad by +90 degrees.
* div u = (1/sin)(d(sin u_theta)/dtheta + d(u_phi)/dphi);
  curl_n u = div(x_hat x u) is the scalar curl.  These satisfy
  div Curl = 0, curl_n grad = 0, curl_n Curl = -Laplacian.
* A divergence-free velocity field is stored as the spectrum of its stream
  function psi, u = Curl psi; the orthonormal velocity coefficient of mode
  (l, m) is sqrt(l(l+1)) psi_hat_lm and the vorticity is curl_n u = -Lap psi.

Longitude transforms run either by direct Fourier summation or through an FFT;
the two paths agree to near machine precision and are both exposed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import GridSpec, QuadratureGrid, VectorFieldGrid, build_grid, integrate_scalar

__all__ = [
    "ScalarSpectrum",
    "SpectralBasis",
    "synth_scalar",
    "analyze_scalar",
    "laplacian",
    "grad",
    "curl_of_scalar",
    "synth_velocity",
    "divergence",
    "curln",
    "hodge_project",
    "norms",
    "velocity_l2",
    "enstrophy",
    "velocity_inner",
    "pad_spectrum",
    "sobolev_velocity_norm",
    "l4_norm",
    "random_stream",
    "eigenvalues",
    "default_basis",
    "quartic_basis",
    "scalar_l2",
]

SQRT_2PI = math.sqrt(2.0 * math.pi)


@lru_cache(maxsize=32)
def _mode_tables(L: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-degree cached tables: (lam_row, m_row, valid mask, lam broadcast grid)."""
    ell = np.arange(L + 1, dtype=float)
    lam = ell * (ell + 1.0)
    m_row = np.arange(-L, L + 1, dtype=float)
    valid = np.abs(m_row)[None, :] <= ell[:, None]
    lam_grid = np.broadcast_to(lam[:, None], (L + 1, 2 * L + 1)).copy()
    lam_grid[~valid] = 0.0
    return lam, m_row, valid, lam_grid


def eigenvalues(L: int) -> np.ndarray:
    """Laplacian eigenvalues lambda_l = l(l+1) for l = 0..L."""
    return _mode_tables(L)[0].copy()


@dataclass
class ScalarSpectrum:
    """Spherical-harmonic coefficients of a scalar, stored as (L+1, 2L+1) complex.

    Column j holds order m = j - L; entries with |m| > l are structurally zero.
    """

    L: int
    coeffs: np.ndarray = field(repr=False)

    @classmethod
    def zeros(cls, L: int) -> "ScalarSpectrum":
        return cls(L=L, coeffs=np.zeros((L + 1, 2 * L + 1), dtype=complex))

    def copy(self) -> "ScalarSpectrum":
        return ScalarSpectrum(L=self.L, coeffs=self.coeffs.copy())

    def get_mode(self, l: int, m: int) -> complex:
        return complex(self.coeffs[l, m + self.L])

    def set_mode(self, l: int, m: int, value: complex) -> None:
        """Set mode (l, m) and its conjugate partner so the field stays real."""
        if abs(m) > l or l > self.L:
            raise ValueError(f"mode (l={l}, m={m}) outside triangle for L={self.L}")
        if m == 0:
            if abs(complex(value).imag) > 0:
                raise ValueError("m=0 coefficients of a real field must be real")
            self.coeffs[l, self.L] = complex(value).real
            return
        self.coeffs[l, m + self.L] = value
        self.coeffs[l, -m + self.L] = (-1) ** m * np.conj(value)

    def conjugate_symmetry_defect(self) -> float:
        """Max deviation from the real-field symmetry c_{l,-m} = (-1)^m conj(c_{l,m})."""
        L = self.L
        _, m_row, valid, _ = _mode_tables(L)
        signs = (-1.0) ** np.abs(m_row)
        mirrored = signs[None, :] * np.conj(self.coeffs[:, ::-1])
        defect = np.abs(self.coeffs - mirrored)
        return float(np.max(defect[valid])) if valid.any() else 0.0

    # small arithmetic surface for the integrators
    def __add__(self, other: "ScalarSpectrum") -> "ScalarSpectrum":
        return ScalarSpectrum(self.L, self.coeffs + other.coeffs)

    def __sub__(self, other: "ScalarSpectrum") -> "ScalarSpectrum":
        return ScalarSpectrum(self.L, self.coeffs - other.coeffs)

    def scaled(self, factor) -> "ScalarSpectrum":
        """Multiply by a scalar or a broadcastable per-mode array."""
        return ScalarSpectrum(self.L, self.coeffs * factor)


def _normalized_legendre_tables(L: int, mu: np.ndarray, sin_theta: np.ndarray):
    """Orthonormal associated Legendre values and theta-derivatives at the nodes.

    Returns (p, dp) of shape (L+1, L+1, n_theta) indexed [l, m, j] for m >= 0.
    Normalization: Int_{-1}^{1} p_lm p_l'm dmu = delta_ll'; Condon-Shortley
    phase is built in via the sectoral recurrence.
    """
    n = mu.size
    p = np.zeros((L + 1, L + 1, n))
    p[0, 0] = 1.0 / math.sqrt(2.0)
    for m in range(1, L + 1):
        p[m, m] = -math.sqrt((2 * m + 1.0) / (2 * m)) * sin_theta * p[m - 1, m - 1]
    for m in range(0, L):
        p[m + 1, m] = math.sqrt(2 * m + 3.0) * mu * p[m, m]
    for m in range(0, L + 1):
        for l in range(m + 2, L + 1):
            a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            p[l, m] = a * (mu * p[l - 1, m] - b * p[l - 2, m])
    dp = np.zeros_like(p)
    for m in range(0, L + 1):
        for l in range(m, L + 1):
            term = l * mu * p[l, m]
            if l - 1 >= m:
                r = math.sqrt((2.0 * l + 1.0) * (l * l - m * m) / (2.0 * l - 1.0))
                term = term - r * p[l - 1, m]
            dp[l, m] = term / sin_theta
    return p, dp


class SpectralBasis:
    """Precomputed transform tables binding a degree L to a quadrature grid.

    Holds the signed full-order Legendre tables (columns m = -L..L), their
    theta-derivatives, the m/sin(theta)-scaled tables entering tangent
    components, and the longitude Fourier matrix.  The quadrature
    orthonormality sum_j w_j Pbar_lm Pbar_l'm = delta_ll' is asserted on
    construction to 1e-12.

    fourier_mode selects the longitude path: "direct" summation (default) or
    "fft"; both are exact for band-limited data and agree to ~1e-14.
    """

    def __init__(self, L: int, grid: QuadratureGrid, fourier_mode: str = "direct"):
        if grid.spec.n_theta < L + 1 or grid.spec.n_phi < 2 * L + 1:
            raise ValueError(
                f"grid {grid.spec} under-resolves degree L={L}"
            )
        if fourier_mode not in ("direct", "fft"):
            raise ValueError(f"unknown fourier_mode {fourier_mode!r}")
        self.L = L
        self.grid = grid
        self.fourier_mode = fourier_mode
        self.lam, self.m_row, self.valid, self.lam_grid = _mode_tables(L)

        p_half, dp_half = _normalized_legendre_tables(L, grid.mu, grid.sin_theta)
        n_theta = grid.spec.n_theta
        W = 2 * L + 1
        plm = np.zeros((L + 1, W, n_theta))
        dplm = np.zeros((L + 1, W, n_theta))
        for m in range(0, L + 1):
            plm[:, L + m, :] = p_half[:, m, :]
            dplm[:, L + m, :] = dp_half[:, m, :]
            if m > 0:
                sign = (-1.0) ** m
                plm[:, L - m, :] = sign * p_half[:, m, :]
                dplm[:, L - m, :] = sign * dp_half[:, m, :]
        self.plm = plm
        self.dplm = dplm
        self.mtab = self.m_row[None, :, None] * plm / grid.sin_theta[None, None, :]

        self._check_orthonormality()
        phase = np.exp(1j * np.outer(self.m_row, grid.phi))
        self._fourier = phase  # (2L+1, n_phi)

    def _check_orthonormality(self) -> None:
        w = self.grid.weights
        for m in (0, self.L // 2, self.L):
            block = self.plm[m:, self.L + m, :]  # rows l = m..L
            gram = np.einsum("aj,bj,j->ab", block, block, w)
            defect = np.max(np.abs(gram - np.eye(block.shape[0])))
            if defect > 1e-12:
                raise AssertionError(
                    f"Legendre quadrature orthonormality defect {defect:.2e} at m={m}"
                )

    # -- longitude helpers ---------------------------------------------------

    def _fourier_synth(self, fm: np.ndarray) -> np.ndarray:
        """(2L+1, n_theta) mode functions -> (n_theta, n_phi) real samples."""
        n_phi = self.grid.spec.n_phi
        if self.fourier_mode == "direct":
            return np.einsum("mj,mk->jk", fm, self._fourier).real
        buf = np.zeros((n_phi, fm.shape[1]), dtype=complex)
        for col, m in enumerate(range(-self.L, self.L + 1)):
            buf[m % n_phi] += fm[col]
        return (np.fft.ifft(buf, axis=0) * n_phi).real.T

    def _fourier_analyze(self, f: np.ndarray) -> np.ndarray:
        """(n_theta, n_phi) samples -> (2L+1, n_theta) mode functions (DFT / n_phi)."""
        n_phi = self.grid.spec.n_phi
        if self.fourier_mode == "direct":
            return np.einsum("jk,mk->mj", f, np.conj(self._fourier)) / n_phi
        hat = np.fft.fft(f, axis=1) / n_phi  # (n_theta, n_phi)
        cols = [hat[:, m % n_phi] for m in range(-self.L, self.L + 1)]
        return np.stack(cols, axis=0)

    # -- scalar transforms ---------------------------------------------------

    def synth_scalar(self, spec: ScalarSpectrum) -> np.ndarray:
        """Evaluate a scalar spectrum on the grid (real part; imag is roundoff)."""
        fm = np.einsum("lm,lmj->mj", spec.coeffs, self.plm) / SQRT_2PI
        return self._fourier_synth(fm)

    def analyze_scalar(self, values: np.ndarray) -> ScalarSpectrum:
        """Project grid samples onto the harmonics (exact for band-limited data)."""
        fm = self._fourier_analyze(values)
        coeffs = SQRT_2PI * np.einsum("mj,lmj,j->lm", fm, self.plm, self.grid.weights)
        coeffs[~self.valid] = 0.0
        return ScalarSpectrum(L=self.L, coeffs=coeffs)

    # -- tangent-field transforms --------------------------------------------

    def synth_velocity(
        self,
        stream: ScalarSpectrum | None = None,
        potential: ScalarSpectrum | None = None,
    ) -> VectorFieldGrid:
        """Samples of u = Curl(stream) + grad(potential) on the grid."""
        W = 2 * self.L + 1
        n_theta = self.grid.spec.n_theta
        ftheta = np.zeros((W, n_theta), dtype=complex)
        fphi = np.zeros((W, n_theta), dtype=complex)
        if stream is not None:
            ftheta += np.einsum("lm,lmj->mj", stream.coeffs, -1j * self.mtab)
            fphi += np.einsum("lm,lmj->mj", stream.coeffs, self.dplm)
        if potential is not None:
            ftheta += np.einsum("lm,lmj->mj", potential.coeffs, self.dplm)
            fphi += np.einsum("lm,lmj->mj", potential.coeffs, 1j * self.mtab)
        return VectorFieldGrid(
            u_theta=self._fourier_synth(ftheta / SQRT_2PI),
            u_phi=self._fourier_synth(fphi / SQRT_2PI),
        )

    def vector_analysis(self, u: VectorFieldGrid) -> tuple[ScalarSpectrum, ScalarSpectrum]:
        """Spectra of (curl_n u, div u), by the adjoint quadrature forms.

        The combined theta/phi sums are exactly integrable for band-limited
        tangent fields even though each term alone has a 1/sin(theta) factor.
        """
        w = self.grid.weights
        ut = self._fourier_analyze(u.u_theta)
        up = self._fourier_analyze(u.u_phi)
        zeta = SQRT_2PI * (
            np.einsum("lmj,mj,j->lm", self.dplm, up, w)
            + 1j * np.einsum("lmj,mj,j->lm", self.mtab, ut, w)
        )
        div = SQRT_2PI * (
            -np.einsum("lmj,mj,j->lm", self.dplm, ut, w)
            + 1j * np.einsum("lmj,mj,j->lm", self.mtab, up, w)
        )
        zeta[~self.valid] = 0.0
        div[~self.valid] = 0.0
        return ScalarSpectrum(self.L, zeta), ScalarSpectrum(self.L, div)


# -- module-level operations ------------------------------------------------


def synth_scalar(spec: ScalarSpectrum, basis: SpectralBasis) -> np.ndarray:
    return basis.synth_scalar(spec)


def analyze_scalar(values: np.ndarray, basis: SpectralBasis) -> ScalarSpectrum:
    return basis.analyze_scalar(values)


def laplacian(spec: ScalarSpectrum) -> ScalarSpectrum:
    """Laplace-Beltrami: multiplies mode (l, m) by -l(l+1)."""
    _, _, _, lam_grid = _mode_tables(spec.L)
    return ScalarSpectrum(spec.L, -lam_grid * spec.coeffs)


def grad(spec: ScalarSpectrum, basis: SpectralBasis) -> VectorFieldGrid:
    """Surface gradient evaluated on the grid."""
    return basis.synth_velocity(potential=spec)


def curl_of_scalar(spec: ScalarSpectrum, basis: SpectralBasis) -> VectorFieldGrid:
    """Curl f = x_hat x grad f evaluated on the grid."""
    return basis.synth_velocity(stream=spec)


def synth_velocity(stream: ScalarSpectrum, basis: SpectralBasis) -> VectorFieldGrid:
    """Velocity samples of the divergence-free field with the given stream spectrum."""
    return basis.synth_velocity(stream=stream)


def curln(u: VectorFieldGrid, basis: SpectralBasis) -> ScalarSpectrum:
    """Spectrum of the scalar curl of a tangent field."""
    zeta, _ = basis.vector_analysis(u)
    return zeta


def divergence(u: VectorFieldGrid, basis: SpectralBasis) -> np.ndarray:
    """Grid samples of div u."""
    _, div_spec = basis.vector_analysis(u)
    return basis.synth_scalar(div_spec)


def hodge_project(
    u: VectorFieldGrid, basis: SpectralBasis
) -> tuple[ScalarSpectrum, dict]:
    """Split a tangent field into Curl(stream) + grad(potential).

    Returns the stream spectrum (the Leray projection of u, as a stream
    function) and a report carrying the potential spectrum, both component
    energies, and the grid-level reconstruction residual.
    """
    zeta, div_spec = basis.vector_analysis(u)
    _, _, _, lam_grid = _mode_tables(basis.L)
    inv_lam = np.zeros_like(lam_grid)
    np.divide(1.0, lam_grid, out=inv_lam, where=lam_grid > 0)
    stream = ScalarSpectrum(basis.L, zeta.coeffs * inv_lam)
    potential = ScalarSpectrum(basis.L, -div_spec.coeffs * inv_lam)
    recon = basis.synth_velocity(stream=stream, potential=potential)
    diff_t = u.u_theta - recon.u_theta
    diff_p = u.u_phi - recon.u_phi
    residual2 = integrate_scalar(basis.grid, diff_t * diff_t + diff_p * diff_p)
    report = {
        "potential": potential,
        "stream_energy": velocity_l2(stream) ** 2,
        "potential_energy": velocity_l2(potential) ** 2,
        "residual_l2": math.sqrt(max(float(residual2), 0.0)),
    }
    return stream, report


# -- norms -------------------------------------------------------------------


def scalar_l2(spec: ScalarSpectrum) -> float:
    """L2 norm of the scalar itself (Parseval)."""
    return float(np.sqrt(np.sum(np.abs(spec.coeffs) ** 2)))


def velocity_l2(stream: ScalarSpectrum) -> float:
    """H-norm ||u|| of u = Curl(stream): sqrt(sum lambda |psi_hat|^2)."""
    _, _, _, lam_grid = _mode_tables(stream.L)
    return float(np.sqrt(np.sum(lam_grid * np.abs(stream.coeffs) ** 2)))


def enstrophy(stream: ScalarSpectrum) -> float:
    """||curl_n u||^2 = sum lambda^2 |psi_hat|^2."""
    _, _, _, lam_grid = _mode_tables(stream.L)
    return float(np.sum(lam_grid**2 * np.abs(stream.coeffs) ** 2))


def velocity_inner(a: ScalarSpectrum, b: ScalarSpectrum) -> float:
    """H inner product of two divergence-free fields given by stream spectra."""
    _, _, _, lam_grid = _mode_tables(a.L)
    return float(np.real(np.sum(lam_grid * a.coeffs * np.conj(b.coeffs))))


def pad_spectrum(spec: ScalarSpectrum, L_new: int) -> ScalarSpectrum:
    """Embed a spectrum into a larger band limit (zero padding)."""
    if L_new < spec.L:
        raise ValueError(f"cannot pad {spec.L} down to {L_new}")
    out = ScalarSpectrum.zeros(L_new)
    off = L_new - spec.L
    out.coeffs[: spec.L + 1, off : off + 2 * spec.L + 1] = spec.coeffs
    return out


def sobolev_velocity_norm(stream: ScalarSpectrum, s: float) -> float:
    """Fractional velocity norm: sqrt(sum lambda^s * lambda |psi_hat|^2)."""
    _, _, _, lam_grid = _mode_tables(stream.L)
    weight = np.zeros_like(lam_grid)
    np.power(lam_grid, s, out=weight, where=lam_grid > 0)
    return float(np.sqrt(np.sum(weight * lam_grid * np.abs(stream.coeffs) ** 2)))


def l4_norm(stream: ScalarSpectrum, quartic_basis: SpectralBasis) -> float:
    """L4 norm of the velocity field, exact on a quartic-capable grid."""
    u = quartic_basis.synth_velocity(stream=stream)
    mag2 = u.u_theta**2 + u.u_phi**2
    return float(integrate_scalar(quartic_basis.grid, mag2 * mag2)) ** 0.25


def norms(stream: ScalarSpectrum, quartic_basis: SpectralBasis) -> dict:
    """Norm bundle {l2, v, l4, enstrophy} of a divergence-free velocity field.

    v is the H1 norm sqrt(||u||^2 + ||curl_n u||^2); the L4 entry needs a
    grid exact for quartics (see GridSpec.quartic).
    """
    l2 = velocity_l2(stream)
    ens = enstrophy(stream)
    return {
        "l2": l2,
        "v": math.sqrt(l2 * l2 + ens),
        "l4": l4_norm(stream, quartic_basis),
        "enstrophy": ens,
    }


# -- random fields -----------------------------------------------------------


def random_stream(
    L: int,
    rng: np.random.Generator,
    slope: float = 1.0,
    l_min: int = 1,
) -> ScalarSpectrum:
    """Random real stream spectrum with per-degree amplitude lambda_l^(-slope/2).

    Used by the verification suites and constant calibration; modes below
    l_min (default: the l=0 gauge mode) stay empty.
    """
    spec = ScalarSpectrum.zeros(L)
    lam, _, _, _ = _mode_tables(L)
    for l in range(max(l_min, 1), L + 1):
        amp = lam[l] ** (-slope / 2.0)
        spec.set_mode(l, 0, amp * rng.standard_normal())
        for m in range(1, l + 1):
            z = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2.0)
            spec.set_mode(l, m, amp * z)
    return spec


def default_basis(L: int, dealias: bool = True, fourier_mode: str = "direct") -> SpectralBasis:
    """Convenience constructor: basis on the standard (optionally 3/2-rule) grid."""
    return SpectralBasis(L, build_grid(GridSpec.for_degree(L, dealias=dealias)), fourier_mode)


def quartic_basis(L: int, fourier_mode: str = "direct") -> SpectralBasis:
    """Basis on the quartic-exact grid (for L4 norms)."""
    return SpectralBasis(L, build_grid(GridSpec.quartic(L)), fourier_mode)
