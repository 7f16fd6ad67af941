"""Resistor-induced dissipation on the main node.

The resistor couples to the node charge, and in the universal Lindblad
treatment a static Hamiltonian picks up a single jump operator whose
eigenbasis matrix elements are the charge elements weighted by a thermal
ohmic rate at the transition energy. The rate normalization pins the
zero-temperature downhill rate at the oscillator spacing to the
configured loss rate; everything else follows from detailed balance.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass

import numpy as np
import scipy.integrate

from . import constants
from .quadratures import EigenSystem, QuadratureGrid, diagonalize, momentum_operator


@dataclass(frozen=True)
class BathSpec:
    """Ohmic charge-coupled bath.

    gamma_ghz is the loss rate; rate_reference_hghz is the transition
    energy at which the T = 0 downhill rate equals gamma_ghz, normally
    the intra-well spacing.
    """

    gamma_ghz: float
    t_mk: float
    rate_reference_hghz: float
    coupling: str = "charge"

    def __post_init__(self) -> None:
        if self.gamma_ghz < 0.0:
            raise ValueError("loss rate must be nonnegative")
        if self.t_mk < 0.0:
            raise ValueError("temperature must be nonnegative")
        if self.rate_reference_hghz <= 0.0:
            raise ValueError("rate reference energy must be positive")
        if self.coupling != "charge":
            raise ValueError("only charge coupling is supported")

    @property
    def kbt_hghz(self) -> float:
        return constants.thermal_energy(self.t_mk)


def thermal_rate(delta_hghz, bath: BathSpec):
    """Rate (1/ns) for a transition releasing delta_hghz into the bath.

    gamma(delta) = Gamma * (delta / reference) / (1 - exp(-delta/kT)),
    continued through delta = 0 where it takes the value Gamma*kT/ref.
    Negative delta (absorption) follows by detailed balance and dies at
    T = 0.
    """
    delta = np.asarray(delta_hghz, dtype=float)
    gamma = bath.gamma_ghz / bath.rate_reference_hghz
    kbt = bath.kbt_hghz
    if kbt == 0.0:
        out = np.where(delta > 0.0, gamma * delta, 0.0)
        return out if out.ndim else float(out)
    x = delta / kbt
    # delta/(1 - e^-x) -> kT as x -> 0; switch to the series there. The
    # clip keeps expm1 finite for splittings far beyond the thermal
    # energy, where the rate is already pure downhill or dead.
    small = np.abs(x) < 1e-8
    safe = np.clip(np.where(small, 1.0, x), -700.0, 700.0)
    denom = -np.expm1(-safe)
    out = np.where(
        small, gamma * kbt * (1.0 + x / 2.0), gamma * delta / np.where(small, 1.0, denom)
    )
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class JumpOperator:
    matrix: np.ndarray
    hamiltonian_id: str

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.matrix.view(float))):
            raise ValueError("jump operator has non-finite entries")

    @property
    def is_zero(self) -> bool:
        return not np.any(self.matrix)


def hamiltonian_fingerprint(h: np.ndarray) -> str:
    digest = hashlib.sha1(np.ascontiguousarray(h).tobytes())
    return digest.hexdigest()[:16]


def ule_jump_operator(
    h: np.ndarray,
    grid: QuadratureGrid,
    bath: BathSpec,
    eig: EigenSystem | None = None,
) -> JumpOperator:
    """Jump operator for a static Hamiltonian coupled via the charge.

    In the eigenbasis, L[m, n] = sqrt(gamma(E_n - E_m)) q[m, n], so
    population flows downhill with the thermal ohmic rate.
    """
    ham_id = hamiltonian_fingerprint(h)
    if bath.gamma_ghz == 0.0:
        return JumpOperator(np.zeros_like(h), ham_id)
    if eig is None:
        eig = diagonalize(h)
    v = eig.vectors
    q_eig = v.conj().T @ momentum_operator(grid) @ v
    rates = thermal_rate(eig.energies[None, :] - eig.energies[:, None], bath)
    matrix = v @ (np.sqrt(rates) * q_eig) @ v.conj().T
    return JumpOperator(matrix, ham_id)


def effective_hamiltonian(h: np.ndarray, jump: JumpOperator) -> np.ndarray:
    """Non-Hermitian generator for the no-jump segment of the SSE.

    With U(t) = exp(-2 pi i H_eff t), the squared norm decays at the
    instantaneous jump rate <L'L> (1/ns), hence the 1/(4 pi).
    """
    l = jump.matrix
    return h - 0.25j / np.pi * (l.conj().T @ l)


class ULECache:
    """Write-once jump-operator cache keyed by Hamiltonian content."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._store: dict[tuple[str, BathSpec], JumpOperator] = {}

    def get(
        self,
        h: np.ndarray,
        grid: QuadratureGrid,
        bath: BathSpec,
        eig: EigenSystem | None = None,
    ) -> JumpOperator:
        key = (hamiltonian_fingerprint(h), bath)
        with self._lock:
            hit = self._store.get(key)
        if hit is not None:
            return hit
        jump = ule_jump_operator(h, grid, bath, eig=eig)
        with self._lock:
            # Another worker may have raced us; keep the first entry.
            return self._store.setdefault(key, jump)

    def __len__(self) -> int:
        return len(self._store)


def lindblad_propagate(
    h: np.ndarray,
    jumps: list[JumpOperator] | tuple[JumpOperator, ...],
    rho0: np.ndarray,
    t_ns: float,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> np.ndarray:
    """Integrate the master equation directly. Small grids only.

    Reference propagator for validating the trajectory engine; cost is
    O(D^3) per right-hand side so keep D at or below a few hundred.
    """
    d = h.shape[0]
    ls = [j.matrix for j in jumps if not j.is_zero]
    lls = [l.conj().T @ l for l in ls]

    def rhs(_t, y):
        rho = y.reshape(d, d)
        out = -2j * np.pi * (h @ rho - rho @ h)
        for l, ll in zip(ls, lls):
            out += l @ rho @ l.conj().T - 0.5 * (ll @ rho + rho @ ll)
        return out.ravel()

    sol = scipy.integrate.solve_ivp(
        rhs,
        (0.0, t_ns),
        rho0.astype(complex).ravel(),
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"master equation integration failed: {sol.message}")
    return sol.y[:, -1].reshape(d, d)
