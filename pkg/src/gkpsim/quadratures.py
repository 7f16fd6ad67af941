"""Discretized flux/charge quadratures and circuit Hamiltonians.

The flux axis x = phi / phi0 is sampled on d points covering [-X, X),
x_j = -X + j dx with dx = 2X / d.  The conjugate charge grid follows from
the discrete Fourier transform with the scaled kernel exp(-i pi p x):
p_n = -1/dx + n dp, dp = 1/X.  Both grids contain 0 and the momentum
grid hits every integer charge when X is an integer, which keeps
period-1 charge patterns exactly representable.

Hamiltonians are dense Hermitian matrices in the flux basis with the
kinetic term built through the centered DFT.  Energies are in h GHz,
per the unit system in :mod:`gkpsim.constants`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import constants


class GridResolutionError(ValueError):
    """Flux spacing too coarse to resolve the junction wells."""


@dataclass(frozen=True)
class QuadratureGrid:
    """Conjugate flux/charge grids for a d-point discretization."""

    d: int
    half_range: int
    dx: float = field(init=False)
    dp: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False, compare=False)
    p: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dx = 2.0 * self.half_range / self.d
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dp", 1.0 / self.half_range)
        object.__setattr__(self, "x", -self.half_range + dx * np.arange(self.d))
        object.__setattr__(
            self, "p", -1.0 / dx + (1.0 / self.half_range) * np.arange(self.d)
        )

    def __hash__(self):
        return hash((self.d, self.half_range))


def build_grid(d: int, half_range: int) -> QuadratureGrid:
    """Validated grid with d a power of two and integer half range X.

    Integer X makes an integer number of charge-grid points span one
    charge period, so crenellation patterns in p carry no sampling
    phase error.
    """
    if d < 4 or (d & (d - 1)) != 0:
        raise ValueError(f"grid size must be a power of two >= 4, got {d}")
    if int(half_range) != half_range or half_range <= 0:
        raise ValueError(f"half range must be a positive integer, got {half_range}")
    return QuadratureGrid(d=int(d), half_range=int(half_range))


def _phase_flips(d: int) -> np.ndarray:
    return np.where(np.arange(d) % 2 == 0, 1.0, -1.0)


def to_charge_basis(grid: QuadratureGrid, psi: np.ndarray) -> np.ndarray:
    """Apply the centered DFT: psi_tilde[n] = sum_j F[n, j] psi[j].

    F[n, j] = exp(-i pi p_n x_j) / sqrt(d) reduces to sign-flipped FFTs
    for d a multiple of four, which is guaranteed by build_grid.
    """
    s = _phase_flips(grid.d)
    return s * np.fft.fft(s * psi, axis=0) / np.sqrt(grid.d)


def from_charge_basis(grid: QuadratureGrid, psi_p: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_charge_basis`."""
    s = _phase_flips(grid.d)
    return s * np.fft.ifft(s * psi_p, axis=0) * np.sqrt(grid.d)


def dft_matrix(grid: QuadratureGrid) -> np.ndarray:
    """Dense centered DFT matrix F[n, j] = exp(-i pi p_n x_j) / sqrt(d)."""
    return np.exp(-1j * np.pi * np.outer(grid.p, grid.x)) / np.sqrt(grid.d)


def position_operator(grid: QuadratureGrid) -> np.ndarray:
    """Flux quadrature x as a diagonal matrix."""
    return np.diag(grid.x).astype(complex)


def momentum_operator(grid: QuadratureGrid) -> np.ndarray:
    """Charge quadrature p = F^dag diag(p) F, hermitized."""
    f = dft_matrix(grid)
    op = f.conj().T @ (grid.p[:, None] * f)
    return 0.5 * (op + op.conj().T)


def _kinetic(grid: QuadratureGrid, eps_c: float) -> np.ndarray:
    f = dft_matrix(grid)
    t = f.conj().T @ ((eps_c * grid.p**2)[:, None] * f)
    return 0.5 * (t + t.conj().T)


def _check_resolution(grid: QuadratureGrid, l_uh: float, c_ff: float, j_hghz: float):
    f_lc = constants.lc_frequency(l_uh, c_ff) if np.isfinite(l_uh) else None
    if f_lc is None:
        # No inductor: use the matched-impedance frequency scale of the
        # capacitor alone for the well width estimate.
        f_lc = 2.0 / np.pi * constants.charging_energy(c_ff)
    lam0 = constants.zero_point_width(f_lc, j_hghz)
    if grid.dx > lam0 / 2.0:
        raise GridResolutionError(
            f"dx = {grid.dx:.4g} exceeds lam0 / 2 = {lam0 / 2.0:.4g}; "
            "increase d or reduce the half range"
        )


def hamiltonian_lcj(
    grid: QuadratureGrid, l_uh: float, c_ff: float, j_hghz: float
) -> np.ndarray:
    """H = eps_C p**2 + eps_L x**2 - J cos(2 pi x) in h GHz.

    l_uh may be numpy.inf for the inductor-free limit.
    """
    if j_hghz > 0.0:
        _check_resolution(grid, l_uh, c_ff, j_hghz)
    eps_l = constants.inductive_energy(l_uh) if np.isfinite(l_uh) else 0.0
    diag = eps_l * grid.x**2 - j_hghz * np.cos(2.0 * np.pi * grid.x)
    h = _kinetic(grid, constants.charging_energy(c_ff))
    h[np.diag_indices_from(h)] += diag
    return h


def hamiltonian_quartic(
    grid: QuadratureGrid, c_ff: float, j_hghz: float, eps4_hghz: float
) -> np.ndarray:
    """Inductor-free gate Hamiltonian eps_C p**2 - J cos(2 pi x) + eps4 x**4."""
    h = hamiltonian_lcj(grid, np.inf, c_ff, j_hghz)
    h[np.diag_indices_from(h)] += eps4_hghz * grid.x**4
    return h


def hamiltonian_effective(
    grid: QuadratureGrid,
    l_uh: float,
    c_ff: float,
    j_hghz: float,
    coefficients: dict[int, float],
) -> np.ndarray:
    """LCJ Hamiltonian plus polynomial corrections sum_k V_k x**k.

    The coefficients are the excess over the bare circuit: V_2 is the
    quadratic part beyond eps_L, so an empty dict reproduces
    :func:`hamiltonian_lcj` exactly.
    """
    h = hamiltonian_lcj(grid, l_uh, c_ff, j_hghz)
    extra = np.zeros(grid.d)
    for k, vk in coefficients.items():
        if k < 0 or int(k) != k:
            raise ValueError(f"polynomial order must be a non-negative integer: {k}")
        extra += vk * grid.x ** int(k)
    h[np.diag_indices_from(h)] += extra
    return h


@dataclass
class EigenSystem:
    """Spectral decomposition H = V diag(E) V^dag of a Hermitian matrix."""

    energies: np.ndarray
    vectors: np.ndarray

    def propagator(self, t_ns: float) -> np.ndarray:
        """Unitary exp(-i 2 pi H t) as a dense matrix."""
        phases = np.exp(-2j * np.pi * self.energies * t_ns)
        return (self.vectors * phases) @ self.vectors.conj().T

    def evolve(self, psi: np.ndarray, t_ns: float) -> np.ndarray:
        """Apply exp(-i 2 pi H t) to a state without forming the matrix."""
        phases = np.exp(-2j * np.pi * self.energies * t_ns)
        return self.vectors @ (phases * (self.vectors.conj().T @ psi))


def assert_hermitian(h: np.ndarray, tol: float = 1e-10):
    """Raise if the matrix deviates from Hermiticity beyond tol."""
    dev = np.max(np.abs(h - h.conj().T))
    if dev > tol:
        raise ValueError(f"matrix is not Hermitian: max deviation {dev:.3g}")


def diagonalize(h: np.ndarray) -> EigenSystem:
    """Eigendecomposition with ascending eigenvalues."""
    assert_hermitian(h, tol=1e-9 * max(1.0, float(np.max(np.abs(h)))))
    energies, vectors = np.linalg.eigh(h)
    return EigenSystem(energies=energies, vectors=vectors)


def propagator(h: np.ndarray | EigenSystem, t_ns: float) -> np.ndarray:
    """Unitary exp(-i 2 pi H t) from a matrix or an existing EigenSystem."""
    eig = h if isinstance(h, EigenSystem) else diagonalize(h)
    return eig.propagator(t_ns)


def normalize(psi: np.ndarray) -> np.ndarray:
    """Unit-norm copy of a state vector."""
    nrm = np.linalg.norm(psi)
    if not np.isfinite(nrm) or nrm == 0.0:
        raise ValueError("state has zero or non-finite norm")
    return psi / nrm
