"""Lumped-element circuit analysis for the gate device.

The device is an LC resonator whose inductor is a chain of three
segments L1, L2, L3 with two internal nodes.  A junction of energy j1p
couples the two internal nodes, j3p shunts the node adjacent to the
main inductor terminal and j2p shunts the node adjacent to ground.
Eliminating the fast internal fluxes at fixed main-node flux x yields
the Born-Oppenheimer effective potential V_eff(x); its quartic
coefficient drives the gate.

All energies are in h GHz, inductances in uH, capacitances in fF,
fluxes in units of phi0 (see :mod:`gkpsim.constants`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import scipy.linalg

from . import constants


class MinimizationError(RuntimeError):
    """Internal-flux relaxation failed to converge."""


class AmbiguousMinimumError(RuntimeError):
    """Two distinct internal-flux minima are degenerate within tolerance."""


class SeriesDivergenceError(RuntimeError):
    """Envelope Fourier series terms grew instead of decaying."""


class ModeInstabilityError(ValueError):
    """Linearized stiffness matrix has a non-positive eigenvalue."""


@dataclass(frozen=True)
class CircuitParams:
    """Device parameters; lengths in uH, energies in h GHz, T in mK.

    c_ff defaults to the impedance-matched value L / R_LC**2.  When the
    ancillary chain is present the three inductors must partition the
    main inductance: l_uh = l1_uh + l2_uh + l3_uh (relative tolerance
    1e-6); omit l_uh to derive it from the partition.
    """

    l_uh: float | None = None
    c_ff: float | None = None
    j_hghz: float = 150.0
    gamma_ghz: float = 0.0
    t_mk: float = 0.0
    l1_uh: float | None = None
    l2_uh: float | None = None
    l3_uh: float | None = None
    j1p_hghz: float = 0.0
    j2p_hghz: float = 0.0
    j3p_hghz: float = 0.0
    cjunc_ff: float | None = None

    def __post_init__(self):
        chain = [self.l1_uh, self.l2_uh, self.l3_uh]
        if any(v is not None for v in chain) and not all(v is not None for v in chain):
            raise ValueError("provide all three chain inductances or none")
        if self.l_uh is None:
            if not self.has_ancilla:
                raise ValueError("l_uh is required without a chain partition")
            object.__setattr__(self, "l_uh", self.l1_uh + self.l2_uh + self.l3_uh)
        if self.l_uh <= 0:
            raise ValueError("main inductance must be positive")
        if self.has_ancilla:
            if min(chain) <= 0:
                raise ValueError("chain inductances must be positive")
            total = self.l1_uh + self.l2_uh + self.l3_uh
            if abs(total - self.l_uh) > 1e-6 * self.l_uh:
                raise ValueError(
                    f"chain inductances sum to {total:.8g} uH, expected {self.l_uh:.8g}"
                )
        if self.c_ff is None:
            object.__setattr__(self, "c_ff", constants.matched_capacitance(self.l_uh))
        if self.c_ff <= 0:
            raise ValueError("capacitance must be positive")
        if self.j_hghz <= 0:
            raise ValueError("main junction energy must be positive")
        if self.t_mk < 0:
            raise ValueError("temperature must be non-negative")
        if self.gamma_ghz < 0:
            raise ValueError("bath coupling must be non-negative")

    @property
    def has_ancilla(self) -> bool:
        return self.l1_uh is not None

    def to_dict(self) -> dict:
        out = {
            "L_uH": self.l_uh,
            "C_fF": self.c_ff,
            "J_hGHz": self.j_hghz,
            "Gamma_GHz": self.gamma_ghz,
            "T_mK": self.t_mk,
        }
        if self.has_ancilla:
            out.update(
                {
                    "L1_uH": self.l1_uh,
                    "L2_uH": self.l2_uh,
                    "L3_uH": self.l3_uh,
                    "J1p_hGHz": self.j1p_hghz,
                    "J2p_hGHz": self.j2p_hghz,
                    "J3p_hGHz": self.j3p_hghz,
                }
            )
        if self.cjunc_ff is not None:
            out["Cjunc_fF"] = self.cjunc_ff
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "CircuitParams":
        known = {
            "L_uH": "l_uh",
            "C_fF": "c_ff",
            "J_hGHz": "j_hghz",
            "Gamma_GHz": "gamma_ghz",
            "T_mK": "t_mk",
            "L1_uH": "l1_uh",
            "L2_uH": "l2_uh",
            "L3_uH": "l3_uh",
            "J1p_hGHz": "j1p_hghz",
            "J2p_hGHz": "j2p_hghz",
            "J3p_hGHz": "j3p_hghz",
            "Cjunc_fF": "cjunc_ff",
        }
        bad = set(data) - set(known)
        if bad:
            raise ValueError(f"unknown circuit keys: {sorted(bad)}")
        return cls(**{known[k]: v for k, v in data.items()})

    @classmethod
    def from_json(cls, path) -> "CircuitParams":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def reference_set(n: int) -> CircuitParams:
    """One of the five bundled reference parameter sets (1-based)."""
    if n not in range(1, 6):
        raise ValueError("reference sets are numbered 1..5")
    text = resources.files("gkpsim").joinpath(f"data/set{n}.json").read_text()
    return CircuitParams.from_dict(json.loads(text))


# Published gate times (us) for the bundled sets, used for validation.
REFERENCE_GATE_TIMES_US = {1: 3.41, 2: 4.19, 3: 9.42, 4: 12.5, 5: 16.5}


def _chain_energies(params: CircuitParams):
    if not params.has_ancilla:
        raise ValueError("circuit has no ancillary chain")
    e1 = constants.inductive_energy(params.l1_uh)
    e2 = constants.inductive_energy(params.l2_uh)
    e3 = constants.inductive_energy(params.l3_uh)
    # j3p sits on the node next to the main inductor (y1), j2p on the
    # node next to ground (y2); j1p couples the two.
    return e1, e2, e3, params.j1p_hghz, params.j3p_hghz, params.j2p_hghz


def _chain_potential(params, x, y1, y2):
    e1, e2, e3, j12, jn1, jn2 = _chain_energies(params)
    tau = 2.0 * np.pi
    return (
        e1 * (x - y1) ** 2
        + e2 * (y1 - y2) ** 2
        + e3 * y2**2
        - j12 * np.cos(tau * (y1 - y2))
        - jn1 * np.cos(tau * y1)
        - jn2 * np.cos(tau * y2)
    )


def _relax_chain(params: CircuitParams, x: np.ndarray):
    """Damped-Newton relaxation of the internal fluxes at fixed x.

    Nine starts per sample: the pure-inductor linear solution plus
    offsets of a third of a flux quantum on each node, which lands in
    any competing junction well.  Returns (y1, y2, value) arrays.
    """
    e1, e2, e3, j12, jn1, jn2 = _chain_energies(params)
    tau = 2.0 * np.pi
    x = np.atleast_1d(np.asarray(x, dtype=float))
    l_tot = params.l1_uh + params.l2_uh + params.l3_uh
    b1 = (params.l2_uh + params.l3_uh) / l_tot
    b2 = params.l3_uh / l_tot

    offsets = np.array([-1.0 / 3.0, 0.0, 1.0 / 3.0])
    scale = 2.0 * (e1 + e2 + e3) + tau**2 * (abs(j12) + abs(jn1) + abs(jn2))
    gtol = 1e-10 * max(scale, 1.0)

    cand_y1, cand_y2, cand_u, cand_ok = [], [], [], []
    for o1 in offsets:
        for o2 in offsets:
            y1 = b1 * x + o1
            y2 = b2 * x + o2
            for _ in range(100):
                s12 = np.sin(tau * (y1 - y2))
                c12 = np.cos(tau * (y1 - y2))
                g1 = (
                    -2.0 * e1 * (x - y1)
                    + 2.0 * e2 * (y1 - y2)
                    + tau * j12 * s12
                    + tau * jn1 * np.sin(tau * y1)
                )
                g2 = (
                    -2.0 * e2 * (y1 - y2)
                    + 2.0 * e3 * y2
                    - tau * j12 * s12
                    + tau * jn2 * np.sin(tau * y2)
                )
                h11 = 2.0 * (e1 + e2) + tau**2 * (
                    j12 * c12 + jn1 * np.cos(tau * y1)
                )
                h12 = -2.0 * e2 - tau**2 * j12 * c12
                h22 = 2.0 * (e2 + e3) + tau**2 * (
                    j12 * c12 + jn2 * np.cos(tau * y2)
                )
                eig_min = 0.5 * (
                    h11 + h22 - np.sqrt((h11 - h22) ** 2 + 4.0 * h12**2)
                )
                ridge = np.maximum(0.0, 1e-2 * scale - eig_min)
                a11 = h11 + ridge
                a22 = h22 + ridge
                det = a11 * a22 - h12**2
                d1 = (-g1 * a22 + g2 * h12) / det
                d2 = (-g2 * a11 + g1 * h12) / det
                step = np.hypot(d1, d2)
                damp = np.minimum(1.0, 0.25 / np.maximum(step, 1e-300))
                y1 = y1 + damp * d1
                y2 = y2 + damp * d2
            s12 = np.sin(tau * (y1 - y2))
            c12 = np.cos(tau * (y1 - y2))
            g1 = (
                -2.0 * e1 * (x - y1)
                + 2.0 * e2 * (y1 - y2)
                + tau * j12 * s12
                + tau * jn1 * np.sin(tau * y1)
            )
            g2 = (
                -2.0 * e2 * (y1 - y2)
                + 2.0 * e3 * y2
                - tau * j12 * s12
                + tau * jn2 * np.sin(tau * y2)
            )
            h11 = 2.0 * (e1 + e2) + tau**2 * (j12 * c12 + jn1 * np.cos(tau * y1))
            h12 = -2.0 * e2 - tau**2 * j12 * c12
            h22 = 2.0 * (e2 + e3) + tau**2 * (j12 * c12 + jn2 * np.cos(tau * y2))
            eig_min = 0.5 * (h11 + h22 - np.sqrt((h11 - h22) ** 2 + 4.0 * h12**2))
            ok = (np.maximum(np.abs(g1), np.abs(g2)) < gtol) & (eig_min > 0.0)
            cand_y1.append(y1)
            cand_y2.append(y2)
            cand_u.append(_chain_potential(params, x, y1, y2))
            cand_ok.append(ok)

    y1s = np.array(cand_y1)
    y2s = np.array(cand_y2)
    us = np.where(np.array(cand_ok), np.array(cand_u), np.inf)
    if np.any(np.all(np.isinf(us), axis=0)):
        bad = x[np.all(np.isinf(us), axis=0)]
        raise MinimizationError(f"no converged minimum at flux values {bad[:5]}")

    best = np.argmin(us, axis=0)
    idx = np.arange(x.size)
    u_best = us[best, idx]
    y1_best = y1s[best, idx]
    y2_best = y2s[best, idx]

    # Degenerate distinct minima are an error, not a silent choice.
    amb_tol = 1e-9 * np.maximum(1.0, np.abs(u_best))
    close = us - u_best[None, :] <= amb_tol[None, :]
    distinct = (
        np.maximum(np.abs(y1s - y1_best), np.abs(y2s - y2_best)) > 1e-5
    )
    conflict = np.any(close & distinct, axis=0)
    if np.any(conflict):
        raise AmbiguousMinimumError(
            f"degenerate internal-flux minima at flux values {x[conflict][:5]}"
        )
    return y1_best, y2_best, u_best


def _chain_mode_frequencies(params: CircuitParams, y1, y2):
    """Internal-mode frequencies (rad/s) at fixed relaxed fluxes."""
    if params.cjunc_ff is None or params.cjunc_ff <= 0:
        raise ValueError("junction capacitance required for mode frequencies")
    cj = params.cjunc_ff * 1e-15
    m = np.array([[2.0 * cj, -cj], [-cj, 2.0 * cj]])
    e1, e2, e3, j12, jn1, jn2 = _chain_energies(params)
    to_si = constants.H_PLANCK * 1e9 / constants.PHI0**2
    tau = 2.0 * np.pi
    c12 = np.cos(tau * (y1 - y2))
    k11 = (2.0 * (e1 + e2) + tau**2 * (j12 * c12 + jn1 * np.cos(tau * y1))) * to_si
    k12 = (-2.0 * e2 - tau**2 * j12 * c12) * to_si
    k22 = (2.0 * (e2 + e3) + tau**2 * (j12 * c12 + jn2 * np.cos(tau * y2))) * to_si
    k = np.array([[k11, k12], [k12, k22]])
    vals = scipy.linalg.eigh(k, m, eigvals_only=True)
    if np.any(vals <= 0):
        raise ModeInstabilityError("internal chain mode unstable")
    return np.sqrt(vals)


def minimize_potential(
    params: CircuitParams, phi, include_vacuum_energy: bool = False
):
    """Effective potential V_eff(phi) - V_eff(0) in h GHz.

    Minimizes the chain potential over the internal fluxes at each
    main-node flux.  The half-sum of the internal mode energies can be
    added with include_vacuum_energy; it is off by default since the
    analysis treats the internal modes as frozen in their ground state
    with a flux-independent energy.
    """
    scalar = np.isscalar(phi)
    x = np.atleast_1d(np.asarray(phi, dtype=float))
    xs = np.concatenate([x, [0.0]])
    y1, y2, u = _relax_chain(params, xs)
    if include_vacuum_energy:
        hf = np.array(
            [
                np.sum(_chain_mode_frequencies(params, a, b))
                for a, b in zip(y1, y2)
            ]
        )
        u = u + hf / (4.0 * np.pi * 1e9)
    out = u[:-1] - u[-1]
    return float(out[0]) if scalar else out


@dataclass
class EffectivePotential:
    """Even-polynomial model of V_eff with fit diagnostics."""

    coefficients: dict[int, float]
    residual: float
    phi_max: float
    n_samples: int
    eps_l_hghz: float

    @property
    def excess(self) -> dict[int, float]:
        """Coefficients with the bare-inductor quadratic removed.

        Suitable for hamiltonian_effective, which adds the eps_L x**2
        term of the main inductor itself.
        """
        out = {k: v for k, v in self.coefficients.items() if k >= 2 and v != 0.0}
        out[2] = self.coefficients.get(2, 0.0) - self.eps_l_hghz
        return out

    @property
    def v4(self) -> float:
        return self.coefficients.get(4, 0.0)


def fit_effective_potential(
    params: CircuitParams,
    phi_max: float = 6.0,
    n_samples: int = 241,
    k_max: int = 8,
    residual_tol: float = 1e-4,
) -> EffectivePotential:
    """Weighted even-polynomial fit of the effective potential.

    Samples V_eff on [-phi_max, phi_max] and fits even powers up to
    k_max with a Gaussian weight of width kappa (the envelope width of
    the stabilized state), so the fit is accurate where the state
    lives.  Returns coefficients in h GHz.
    """
    if phi_max <= 0:
        raise ValueError("phi_max must be positive")
    if n_samples < 4 * k_max:
        raise ValueError(f"need at least {4 * k_max} samples for k_max = {k_max}")
    if k_max < 4 or k_max % 2:
        raise ValueError("k_max must be an even integer >= 4")

    scales = derived_scales(params)
    xs = np.linspace(-phi_max, phi_max, n_samples)
    v = minimize_potential(params, xs)
    w = np.exp(-(xs**2) / (2.0 * scales.kappa**2))

    orders = list(range(0, k_max + 1, 2))
    basis = np.stack([(xs / phi_max) ** k for k in orders], axis=1)
    a, _, rank, _ = np.linalg.lstsq(w[:, None] * basis, w * v, rcond=None)
    if rank < len(orders):
        raise ValueError("rank-deficient polynomial fit")

    pred = basis @ a
    residual = float(np.sqrt(np.sum(w * (pred - v) ** 2) / np.sum(w)))
    if residual > residual_tol:
        raise ValueError(
            f"fit residual {residual:.3g} h GHz exceeds tolerance {residual_tol:.3g}"
        )

    coeffs = {k: 0.0 for k in range(k_max + 1)}
    for k, ak in zip(orders, a):
        coeffs[k] = float(ak / phi_max**k)
    return EffectivePotential(
        coefficients=coeffs,
        residual=residual,
        phi_max=phi_max,
        n_samples=n_samples,
        eps_l_hghz=constants.inductive_energy(params.l_uh),
    )


@dataclass
class DerivedScales:
    """Design-formula scales of the stabilized circuit (h GHz, ns)."""

    f_lc: float
    lam0: float
    eps0: float
    eps_l: float
    eps_c: float
    kappa: float
    c_t: float
    kbt: float
    t_rev: float
    t4: float | None = None
    t2: float | None = None
    t_gate: float | None = None


def derived_scales(
    params: CircuitParams, v4: float | None = None, v2: float = 0.0
) -> DerivedScales:
    """Populate the derived scales; gate times only when V4 is given.

    The phase-correction duration t2 accounts for the quadratic excess
    V2 of the gate circuit: the inter-well phase advances at rate
    2 pi f_LC + 4 V2/h during the quartic segment, and the correction
    runs on the bare circuit until the total is a multiple of 2 pi.
    """
    eps_l = constants.inductive_energy(params.l_uh)
    eps_c = constants.charging_energy(params.c_ff)
    f_lc = constants.lc_frequency(params.l_uh, params.c_ff)
    lam0 = constants.zero_point_width(f_lc, params.j_hghz)
    eps0 = constants.well_spacing(f_lc, params.j_hghz)
    c_t = constants.thermal_width_factor(eps0, params.t_mk)
    kappa = c_t / (np.pi * lam0)
    kbt = constants.thermal_energy(params.t_mk)
    t_rev = 1.0 / (4.0 * eps_l)

    t4 = t2 = t_gate = None
    if v4 is not None:
        if v4 == 0.0:
            raise ValueError("V4 = 0 gives no finite gate time")
        t4 = 1.0 / (16.0 * abs(v4))
        turns = t4 * (2.0 * np.pi * f_lc + 4.0 * v2) / 4.0
        t2 = (math.floor(turns) + 1.0 - turns) * 4.0 * t_rev
        t_gate = t4 + t2
    return DerivedScales(
        f_lc=f_lc,
        lam0=lam0,
        eps0=eps0,
        eps_l=eps_l,
        eps_c=eps_c,
        kappa=kappa,
        c_t=c_t,
        kbt=kbt,
        t_rev=t_rev,
        t4=t4,
        t2=t2,
        t_gate=t_gate,
    )


@dataclass
class NormalModes:
    """Linearized mode frequencies about a well, ascending."""

    omega_rad_ns: np.ndarray
    temperatures_k: np.ndarray

    @property
    def frequencies_ghz(self) -> np.ndarray:
        return self.omega_rad_ns / (2.0 * np.pi)


def normal_mode_frequencies(params: CircuitParams, n_well: int = 0) -> NormalModes:
    """Three normal modes of the full circuit linearized about well N.

    Masses come from the shunt capacitor on the main node and the
    junction capacitances on the internal nodes (the main junction's
    own capacitance is negligible against the shunt, C >> C_junc).
    Stiffness is the Hessian of the total potential at the relaxed
    internal fluxes.
    """
    if params.cjunc_ff is None or params.cjunc_ff <= 0:
        raise ValueError("junction capacitance must be positive")
    if int(n_well) != n_well:
        raise ValueError("expansion well index must be an integer")
    y1, y2, _ = _relax_chain(params, np.array([float(n_well)]))
    y1, y2 = float(y1[0]), float(y2[0])

    c = params.c_ff * 1e-15
    cj = params.cjunc_ff * 1e-15
    mass = np.array(
        [[c, 0.0, 0.0], [0.0, 2.0 * cj, -cj], [0.0, -cj, 2.0 * cj]]
    )

    to_si = constants.H_PLANCK * 1e9 / constants.PHI0**2  # h GHz / phi0**2 -> J / Wb**2
    tau = 2.0 * np.pi
    e1, e2, e3, j12, jn1, jn2 = _chain_energies(params)
    c12 = np.cos(tau * (y1 - y2))
    kmain = tau**2 * params.j_hghz * np.cos(tau * n_well)
    k = np.array(
        [
            [kmain + 2.0 * e1, -2.0 * e1, 0.0],
            [
                -2.0 * e1,
                2.0 * (e1 + e2) + tau**2 * (j12 * c12 + jn1 * np.cos(tau * y1)),
                -2.0 * e2 - tau**2 * j12 * c12,
            ],
            [
                0.0,
                -2.0 * e2 - tau**2 * j12 * c12,
                2.0 * (e2 + e3) + tau**2 * (j12 * c12 + jn2 * np.cos(tau * y2)),
            ],
        ]
    ) * to_si
    vals = scipy.linalg.eigh(k, mass, eigvals_only=True)
    for i, v in enumerate(np.sort(vals)):
        if v <= 0:
            raise ModeInstabilityError(
                f"mode {i + 1} is unstable: omega**2 = {v:.3e} (rad/s)**2"
            )
    omega_si = np.sqrt(np.sort(vals))
    hbar = constants.H_PLANCK / (2.0 * np.pi)
    return NormalModes(
        omega_rad_ns=omega_si * 1e-9,
        temperatures_k=hbar * omega_si / constants.K_B,
    )


@dataclass
class ConstraintMargins:
    """Per-order constraint ratios and the overall pass flag."""

    ratios: dict[int, float]
    threshold: float
    passed: bool


def constraint_eigenstate(
    coefficients: dict[int, float],
    scales: DerivedScales,
    alpha: float = 2.0,
    zeta: float = 1.0,
    threshold: float = 0.1,
) -> ConstraintMargins:
    """Ratio of each V_k to the eigenstate-perturbation bound.

    The bound keeps the per-well eigenstates essentially unchanged by
    the polynomial correction:

        bound_k = f_LC lam0**(k-4) pi**(k-2) alpha**(1-k) c_T**(1-k)
                  sqrt(1 / (1 + k_B T pi lam0**2 / (zeta f_LC)))

    alpha and zeta are order-1 shape constants exposed as configuration.
    """
    if alpha <= 0 or zeta <= 0:
        raise ValueError("alpha and zeta must be positive")
    temp_factor = math.sqrt(
        1.0 / (1.0 + scales.kbt * np.pi * scales.lam0**2 / (zeta * scales.f_lc))
    )
    ratios = {}
    for k, vk in coefficients.items():
        if k == 0:
            continue
        bound = (
            scales.f_lc
            * scales.lam0 ** (k - 4)
            * np.pi ** (k - 2)
            * alpha ** (1 - k)
            * scales.c_t ** (1 - k)
            * temp_factor
        )
        ratios[k] = abs(vk) / bound
    return ConstraintMargins(
        ratios=ratios,
        threshold=threshold,
        passed=all(r < threshold for r in ratios.values()),
    )


def constraint_dephasing(
    coefficients: dict[int, float],
    kappa: float,
    t4_ns: float,
    threshold: float = 0.1,
) -> ConstraintMargins:
    """Accumulated envelope phase alpha_k kappa**k per unwanted order.

    The quartic (gate) and quadratic (compensated) terms are exempt;
    every other order dephases the envelope and must stay small over
    the gate duration: ratio_k = V_k kappa**k t4 / hbar.
    """
    if kappa <= 0 or t4_ns <= 0:
        raise ValueError("kappa and t4 must be positive")
    ratios = {
        k: 2.0 * np.pi * abs(vk) * kappa**k * t4_ns
        for k, vk in coefficients.items()
        if k not in (0, 2, 4)
    }
    return ConstraintMargins(
        ratios=ratios,
        threshold=threshold,
        passed=all(r < threshold for r in ratios.values()),
    )


def envelope_ft_series(
    kappa: float, k: int, alpha_k: float, q, m_max: int = 8
) -> np.ndarray:
    """Fourier transform of the phase-modified Gaussian envelope.

    Evaluates F[chi exp(-i alpha_k x**k)](q) by expanding the phase and
    integrating term by term against the Gaussian:

        F(q) = kappa exp(-u**2/2) sum_m ((-i alpha_k kappa**k)**m / m!)
               (-i)**(mk) He_mk(u),    u = pi kappa q,

    with He_n the probabilists' Hermite polynomials (computed by
    recurrence).  The expansion is asymptotic: terms must decay over
    the summed range.  Growth of the Gaussian-weighted terms raises
    SeriesDivergenceError with the offending order.
    """
    if m_max < 1:
        raise ValueError("m_max must be at least 1")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    q = np.atleast_1d(np.asarray(q, dtype=float))
    u = np.pi * kappa * q
    gauss = np.exp(-(u**2) / 2.0)

    top = m_max * k
    he_prev = np.ones_like(u)
    he_curr = u.copy()
    hermites = {0: he_prev.copy()}
    if top >= 1:
        hermites[1] = he_curr.copy()
    for n in range(1, top):
        he_prev, he_curr = he_curr, u * he_curr - n * he_prev
        hermites[n + 1] = he_curr.copy()

    total = np.zeros_like(u, dtype=complex)
    prev_mag = None
    for m in range(m_max + 1):
        coef = (-1j * alpha_k * kappa**k) ** m / math.factorial(m) * (-1j) ** (m * k)
        term = coef * hermites[m * k]
        mag = float(np.max(np.abs(term) * gauss))
        if m >= 2 and prev_mag is not None and mag > prev_mag and mag > 1e-12:
            raise SeriesDivergenceError(
                f"term magnitude grew at order m = {m} "
                f"({prev_mag:.3e} -> {mag:.3e}); reduce m_max or alpha_k"
            )
        prev_mag = mag
        total += term
    return kappa * gauss * total
