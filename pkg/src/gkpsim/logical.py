"""Grid-code logical observables, codewords and frame bookkeeping.

Logical Pauli expectations are read out through crenellation functions,
square waves of period 2 in the flux or charge coordinate: sigma_z is
diagonal in flux with the sign of cos(pi x), sigma_x is the same pattern
in charge, and sigma_y = -i sigma_z sigma_x.  Stabilizer expectations
S1 = <cos(2 pi x)> and S2 = <cos(2 pi p)> quantify grid quality.

The passive segments of the protocol permute the logical frame instead
of leaving it fixed.  The Bloch-vector maps for a stabilizer segment
(one revival period), a free segment (quarter LC period) and their
combination are provided here so schedules can track the frame exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .quadratures import QuadratureGrid, dft_matrix, from_charge_basis, to_charge_basis


def crenellation(u: np.ndarray) -> np.ndarray:
    """Square wave sgn[cos(pi u)]: +1 near even integers, -1 near odd, 0 midway.

    Evaluated through the parity of the nearest integer so half-integer
    points give exactly 0 (round-half-to-even makes |u - round(u)| = 1/2
    detectable without floating-point cancellation in the cosine).
    """
    u = np.asarray(u, dtype=float)
    nearest = np.round(u)
    sign = np.where(np.mod(nearest, 2.0) == 0.0, 1.0, -1.0)
    return np.where(np.abs(u - nearest) == 0.5, 0.0, sign)


@lru_cache(maxsize=4)
def _logical_matrices(grid: QuadratureGrid):
    f = dft_matrix(grid)
    sz = np.diag(crenellation(grid.x)).astype(complex)
    sx = f.conj().T @ (crenellation(grid.p)[:, None] * f)
    sx = 0.5 * (sx + sx.conj().T)
    sy = -1j * (sz @ sx)
    return sx, sy, sz


def logical_operators(grid: QuadratureGrid):
    """Dense (sigma_x, sigma_y, sigma_z); cached per grid shape."""
    return _logical_matrices(grid)


@dataclass
class Readout:
    """Logical and stabilizer expectations of a normalized state."""

    bloch: np.ndarray  # (sx, sy, sz)
    s1: float
    s2: float
    edge_population: float


def measure_logicals(grid: QuadratureGrid, psi: np.ndarray) -> Readout:
    """Bloch vector, stabilizers and edge-cell population of a state."""
    nrm2 = float(np.vdot(psi, psi).real)
    if nrm2 <= 0.0 or not np.isfinite(nrm2):
        raise ValueError("cannot read out a state with zero or non-finite norm")
    psi = psi / np.sqrt(nrm2)
    psi_p = to_charge_basis(grid, psi)

    zx = crenellation(grid.x)
    zp = crenellation(grid.p)
    prob_x = np.abs(psi) ** 2
    prob_p = np.abs(psi_p) ** 2

    sz = float(np.dot(zx, prob_x))
    sx = float(np.dot(zp, prob_p))
    # sigma_y = -i sigma_z sigma_x needs the cross pattern, not a marginal.
    phi = from_charge_basis(grid, zp * psi_p)
    sy = float(np.real(np.vdot(psi, -1j * zx * phi)))

    s1 = float(np.dot(np.cos(2.0 * np.pi * grid.x), prob_x))
    s2 = float(np.dot(np.cos(2.0 * np.pi * grid.p), prob_p))
    edge = float(prob_x[0] + prob_x[-1])
    return Readout(bloch=np.array([sx, sy, sz]), s1=s1, s2=s2, edge_population=edge)


def fidelity(bloch: np.ndarray, target: np.ndarray) -> float:
    """Qubit state fidelity (1 + b . t) / 2 against a unit target vector."""
    target = np.asarray(target, dtype=float)
    nrm = np.linalg.norm(target)
    if nrm == 0.0:
        raise ValueError("target Bloch vector must be nonzero")
    overlap = float(np.dot(np.asarray(bloch, dtype=float), target / nrm))
    return min(1.0, max(0.0, 0.5 * (1.0 + overlap)))


def rotate_z(bloch: np.ndarray, angle: float) -> np.ndarray:
    """Rotate a Bloch vector by an angle about the z axis."""
    x, y, z = bloch
    c, s = np.cos(angle), np.sin(angle)
    return np.array([c * x - s * y, s * x + c * y, z])


def stabilizer_map(bloch: np.ndarray) -> np.ndarray:
    """Frame permutation of one revival period: (x, y, z) -> (y, -x, z)."""
    x, y, z = bloch
    return np.array([y, -x, z])


def free_map(bloch: np.ndarray) -> np.ndarray:
    """Frame permutation of a quarter LC period: (x, y, z) -> (z, -y, x)."""
    x, y, z = bloch
    return np.array([z, -y, x])


def cleanup_map(bloch: np.ndarray) -> np.ndarray:
    """Stabilizer followed by free segment: (x, y, z) -> (z, x, y); cubes to identity."""
    return free_map(stabilizer_map(bloch))


def ideal_codeword(
    grid: QuadratureGrid,
    bloch: np.ndarray,
    lam0: float,
    kappa: float,
    n_wells: int = 10,
) -> np.ndarray:
    """Finite-energy grid-code state with a target Bloch vector.

    Teeth are Gaussians of width lam0 / sqrt(2) at integer flux, weighted
    by the amplitude envelope exp(-N**2 / 2 kappa**2), the sampled form of
    a flux-space Gaussian of width kappa.  Even wells carry the logical 0
    component, odd wells the logical 1 component.
    """
    bloch = np.asarray(bloch, dtype=float)
    nrm = np.linalg.norm(bloch)
    if nrm == 0.0:
        raise ValueError("target Bloch vector must be nonzero")
    bx, by, bz = bloch / nrm
    theta = np.arccos(np.clip(bz, -1.0, 1.0))
    phi = np.arctan2(by, bx)
    amp0 = np.cos(theta / 2.0)
    amp1 = np.exp(1j * phi) * np.sin(theta / 2.0)

    sigma = lam0 / np.sqrt(2.0)
    psi = np.zeros(grid.d, dtype=complex)
    for n in range(-n_wells, n_wells + 1):
        tooth = np.exp(-((grid.x - n) ** 2) / (4.0 * sigma**2))
        tooth /= np.linalg.norm(tooth)
        weight = np.exp(-(n**2) / (2.0 * kappa**2))
        psi += weight * (amp0 if n % 2 == 0 else amp1) * tooth
    return psi / np.linalg.norm(psi)


def well_state(grid: QuadratureGrid, n: int, lam0: float) -> np.ndarray:
    """Normalized Gaussian of width lam0 / sqrt(2) centered on well n."""
    sigma = lam0 / np.sqrt(2.0)
    tooth = np.exp(-((grid.x - n) ** 2) / (4.0 * sigma**2)).astype(complex)
    return tooth / np.linalg.norm(tooth)


def displace_flux(grid: QuadratureGrid, psi: np.ndarray, d: float) -> np.ndarray:
    """Shift a state by d along the flux axis: exp(-i pi d p_hat)."""
    psi_p = to_charge_basis(grid, psi)
    return from_charge_basis(grid, np.exp(-1j * np.pi * d * grid.p) * psi_p)


def displace_charge(grid: QuadratureGrid, psi: np.ndarray, d: float) -> np.ndarray:
    """Shift a state by d along the charge axis: exp(+i pi d x_hat)."""
    return np.exp(1j * np.pi * d * grid.x) * psi


def parity_operator_apply(psi: np.ndarray) -> np.ndarray:
    """Grid-exact spatial inversion x -> -x.

    On the symmetric grid x_j = -X + j dx the point -x_j sits at index
    (-j) mod d, so inversion is a reversal followed by a one-slot roll.
    """
    return np.roll(psi[::-1], 1)
