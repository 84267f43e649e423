"""Quadrature grids on the unit sphere.

Colatitude nodes are Gauss-Legendre in mu = cos(theta) (poles are never nodes),
longitude nodes are uniform.  A grid of design degree L integrates exactly every
spherical polynomial appearing in degree-L transform inner products: the
Gauss-Legendre rule with n_theta points is exact for integrands of polynomial
degree <= 2*n_theta - 1 in mu, and the trapezoidal rule in phi is exact for
Fourier modes |m| < n_phi.

Surface element: dS = sin(theta) dtheta dphi = dmu dphi, total area 4*pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridSpec",
    "QuadratureGrid",
    "VectorFieldGrid",
    "build_grid",
    "gauss_legendre",
    "integrate_scalar",
    "integrate_dot",
]

_NEWTON_TOL = 1e-15
_NEWTON_MAX_ITER = 100


def _legendre_and_derivative(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate P_n(x) and P_n'(x) by the three-term recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    if n == 0:
        return p_prev, np.zeros_like(x)
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (ascending, in (-1, 1)) and weights of the n-point Gauss-Legendre rule.

    Newton iteration on P_n from the Chebyshev-like initial guess, converged to
    1e-15 in node increment.  Fully deterministic.
    """
    if n < 1:
        raise ValueError(f"need at least one node, got n={n}")
    i = np.arange(1, n + 1, dtype=float)
    x = np.cos(math.pi * (i - 0.25) / (n + 0.5))
    for _ in range(_NEWTON_MAX_ITER):
        p, dp = _legendre_and_derivative(n, x)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    else:  # pragma: no cover - the iteration converges in < 10 sweeps
        raise RuntimeError("Gauss-Legendre Newton iteration did not converge")
    _, dp = _legendre_and_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return x[order], w[order]


@dataclass(frozen=True)
class GridSpec:
    """Grid resolution request for spectral degree L."""

    L: int
    n_theta: int
    n_phi: int

    @classmethod
    def for_degree(cls, L: int, dealias: bool = False) -> "GridSpec":
        """Minimal exact grid for degree L, or the 3/2-rule grid for quadratic products."""
        if dealias:
            return cls(L=L, n_theta=math.ceil(3 * (L + 1) / 2), n_phi=3 * L + 1)
        return cls(L=L, n_theta=L + 1, n_phi=2 * L + 1)

    @classmethod
    def quartic(cls, L: int) -> "GridSpec":
        """Grid on which quartics of degree-L fields integrate exactly.

        |u|^4 of a degree-L stream field is band-limited to spherical degree
        4L + 4, so we need 2*n_theta - 1 >= 4L + 4 and n_phi >= 4L + 5.
        """
        return cls(L=L, n_theta=2 * L + 3, n_phi=4 * L + 5)


@dataclass(frozen=True)
class QuadratureGrid:
    """Realized quadrature grid: nodes, weights and trigonometric tables.

    theta is ascending in (0, pi); mu = cos(theta) is therefore descending.
    ``weights`` are the Gauss-Legendre weights in mu (they already absorb the
    sin(theta) surface factor); the phi weight is the constant 2*pi/n_phi.
    """

    spec: GridSpec
    theta: np.ndarray
    mu: np.ndarray
    sin_theta: np.ndarray
    weights: np.ndarray
    phi: np.ndarray

    @property
    def phi_weight(self) -> float:
        return 2.0 * math.pi / self.spec.n_phi

    @property
    def cell_weights(self) -> np.ndarray:
        """(n_theta, n_phi) array of full surface quadrature weights."""
        return self.weights[:, None] * np.full(self.spec.n_phi, self.phi_weight)


@dataclass
class VectorFieldGrid:
    """Tangent vector field sampled on a grid, in local (e_theta, e_phi) components."""

    u_theta: np.ndarray
    u_phi: np.ndarray

    def __add__(self, other: "VectorFieldGrid") -> "VectorFieldGrid":
        return VectorFieldGrid(self.u_theta + other.u_theta, self.u_phi + other.u_phi)

    def __sub__(self, other: "VectorFieldGrid") -> "VectorFieldGrid":
        return VectorFieldGrid(self.u_theta - other.u_theta, self.u_phi - other.u_phi)

    def scaled(self, factor: float) -> "VectorFieldGrid":
        return VectorFieldGrid(factor * self.u_theta, factor * self.u_phi)


def build_grid(spec: GridSpec) -> QuadratureGrid:
    """Build the quadrature grid and check its design invariants.

    Rejects resolutions below the band-limit minimum (n_theta >= L+1,
    n_phi >= 2L+1).  Node/weight sanity (weights sum to 2, nodes strictly
    inside (-1,1) and symmetric) is asserted on construction.
    """
    if spec.L < 0:
        raise ValueError(f"degree must be non-negative, got L={spec.L}")
    if spec.n_theta < spec.L + 1:
        raise ValueError(
            f"n_theta={spec.n_theta} under-resolves degree L={spec.L} (need >= {spec.L + 1})"
        )
    if spec.n_phi < 2 * spec.L + 1:
        raise ValueError(
            f"n_phi={spec.n_phi} under-resolves degree L={spec.L} (need >= {2 * spec.L + 1})"
        )
    x, w = gauss_legendre(spec.n_theta)
    if not (abs(float(np.sum(w)) - 2.0) < 1e-13):
        raise AssertionError("Gauss-Legendre weights do not sum to 2")
    if not (np.all(x > -1.0) and np.all(x < 1.0)):
        raise AssertionError("Gauss-Legendre nodes escaped (-1, 1)")
    if not np.allclose(x, -x[::-1], atol=1e-14):
        raise AssertionError("Gauss-Legendre nodes are not symmetric")
    # theta ascending <-> mu descending
    mu = x[::-1].copy()
    weights = w[::-1].copy()
    theta = np.arccos(mu)
    sin_theta = np.sqrt(1.0 - mu * mu)
    phi = 2.0 * math.pi * np.arange(spec.n_phi) / spec.n_phi
    return QuadratureGrid(
        spec=spec, theta=theta, mu=mu, sin_theta=sin_theta, weights=weights, phi=phi
    )


def integrate_scalar(grid: QuadratureGrid, values: np.ndarray) -> float | complex:
    """Surface integral of a scalar sampled on the grid."""
    acc = np.sum(values * grid.weights[:, None]) * grid.phi_weight
    if np.iscomplexobj(values):
        return complex(acc)
    return float(acc)


def integrate_dot(grid: QuadratureGrid, u: VectorFieldGrid, v: VectorFieldGrid) -> float:
    """L2 pairing of two tangent fields: Int (u_theta v_theta + u_phi v_phi) dS."""
    dots = u.u_theta * v.u_theta + u.u_phi * v.u_phi
    return float(np.sum(dots * grid.weights[:, None]) * grid.phi_weight)
