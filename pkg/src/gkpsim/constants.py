"""Physical constants and the scaled unit system used throughout.

Conventions
-----------
Energies are quoted in units of h * GHz, times in ns, so exp(-i 2 pi E t)
is the phase accumulated by a stationary state of energy E (h GHz) over
t (ns).  Flux is measured in units of the reduced quantum phi0 = h / 2e,
charge in units of the electron charge e:

    x = phi / phi0,   p = q / e,   [x, p] = i / pi.

The effective Planck constant in these coordinates is 1 / pi.  An LC
oscillator with sqrt(L / C) = h / 2e**2 has equal flux and charge
energies, eps_L = eps_C, and oscillation frequency f_LC = (2 / pi) eps_L.
"""

from __future__ import annotations

import math

# SI values (2019 exact definitions).
H_PLANCK = 6.62607015e-34  # J s
E_CHARGE = 1.602176634e-19  # C
K_B = 1.380649e-23  # J / K

PHI0 = H_PLANCK / (2.0 * E_CHARGE)  # Wb, reduced flux quantum h / 2e
R_LC = H_PLANCK / (2.0 * E_CHARGE**2)  # ohm, impedance with eps_L = eps_C

HBAR_EFF = 1.0 / math.pi  # value of [x, p] / i in scaled coordinates


def inductive_energy(l_uh: float) -> float:
    """eps_L = phi0**2 / 2L in h GHz for an inductance in uH."""
    return PHI0**2 / (2.0 * l_uh * 1e-6) / (H_PLANCK * 1e9)


def charging_energy(c_ff: float) -> float:
    """eps_C = e**2 / 2C in h GHz for a capacitance in fF."""
    return E_CHARGE**2 / (2.0 * c_ff * 1e-15) / (H_PLANCK * 1e9)


def matched_capacitance(l_uh: float) -> float:
    """Capacitance in fF giving sqrt(L / C) = h / 2e**2."""
    return (l_uh * 1e-6) / R_LC**2 * 1e15


def lc_frequency(l_uh: float, c_ff: float) -> float:
    """LC resonance frequency 1 / (2 pi sqrt(LC)) in GHz."""
    return 1.0 / (2.0 * math.pi * math.sqrt(l_uh * 1e-6 * c_ff * 1e-15)) / 1e9


def thermal_energy(t_mk: float) -> float:
    """k_B T in h GHz for a temperature in mK."""
    return K_B * t_mk * 1e-3 / (H_PLANCK * 1e9)


def well_spacing(f_lc_ghz: float, j_hghz: float) -> float:
    """Ground-to-first-band gap eps_0 = f_LC / (pi lam0**2) in h GHz."""
    return f_lc_ghz / (math.pi * zero_point_width(f_lc_ghz, j_hghz) ** 2)


def zero_point_width(f_lc_ghz: float, j_hghz: float) -> float:
    """Flux zero-point width lam0 = (f_LC / 4 pi**3 J)**(1/4) of a junction well."""
    return (f_lc_ghz / (4.0 * math.pi**3 * j_hghz)) ** 0.25


def thermal_width_factor(eps0_hghz: float, t_mk: float) -> float:
    """Width enhancement c_T = coth(2 eps_0 / k_B T)**(1/2); 1 at T = 0."""
    if t_mk <= 0.0:
        return 1.0
    arg = 2.0 * eps0_hghz / thermal_energy(t_mk)
    if arg > 40.0:
        return 1.0
    return math.sqrt(1.0 / math.tanh(arg))
