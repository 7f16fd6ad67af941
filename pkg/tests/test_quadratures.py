"""Grid construction, DFT conventions and Hamiltonian spectra."""

import numpy as np
import pytest

from gkpsim import constants, quadratures
from gkpsim.quadratures import (
    EigenSystem,
    GridResolutionError,
    build_grid,
    diagonalize,
    dft_matrix,
    from_charge_basis,
    hamiltonian_effective,
    hamiltonian_lcj,
    hamiltonian_quartic,
    momentum_operator,
    propagator,
    to_charge_basis,
)


def gaussian(grid, center=0.0, width=1.0, p0=0.0):
    psi = np.exp(-((grid.x - center) ** 2) / (4.0 * width**2)).astype(complex)
    psi *= np.exp(1j * np.pi * p0 * grid.x)
    return psi / np.linalg.norm(psi)


class TestGrid:
    def test_small_grid_points(self):
        g = build_grid(4, 2)
        assert g.dx == 1.0
        assert g.dp == 0.5
        np.testing.assert_array_equal(g.x, [-2.0, -1.0, 0.0, 1.0])
        np.testing.assert_array_equal(g.p, [-1.0, -0.5, 0.0, 0.5])

    def test_default_grid_spacings(self):
        g = build_grid(1024, 12)
        assert g.dx == 0.0234375
        assert abs(g.dp - 1.0 / 12.0) < 1e-15
        assert 0.0 in g.x and 0.0 in g.p

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            build_grid(1000, 12)
        with pytest.raises(ValueError):
            build_grid(2, 12)
        with pytest.raises(ValueError):
            build_grid(1024, 0)
        with pytest.raises(ValueError):
            build_grid(1024, -3)


class TestTransforms:
    def test_dft_unitary(self, grid_small):
        f = dft_matrix(grid_small)
        np.testing.assert_allclose(
            f @ f.conj().T, np.eye(grid_small.d), atol=1e-12
        )

    def test_fft_path_matches_dense(self, grid_small, rng):
        psi = rng.normal(size=grid_small.d) + 1j * rng.normal(size=grid_small.d)
        f = dft_matrix(grid_small)
        np.testing.assert_allclose(
            to_charge_basis(grid_small, psi), f @ psi, atol=1e-10
        )
        np.testing.assert_allclose(
            from_charge_basis(grid_small, psi), f.conj().T @ psi, atol=1e-10
        )

    def test_round_trip(self, grid_small, rng):
        psi = rng.normal(size=grid_small.d) + 1j * rng.normal(size=grid_small.d)
        back = from_charge_basis(grid_small, to_charge_basis(grid_small, psi))
        np.testing.assert_allclose(back, psi, atol=1e-12)


class TestMomentum:
    def test_constant_annihilated(self, grid_small):
        p = momentum_operator(grid_small)
        const = np.ones(grid_small.d) / np.sqrt(grid_small.d)
        assert np.max(np.abs(p @ const)) < 1e-10

    def test_plane_wave_eigenvector(self, grid_small):
        p = momentum_operator(grid_small)
        k = grid_small.p[grid_small.d // 2 + 7]  # on-grid momentum
        wave = np.exp(1j * np.pi * k * grid_small.x) / np.sqrt(grid_small.d)
        np.testing.assert_allclose(p @ wave, k * wave, atol=1e-10)

    def test_commutator_on_gaussian(self, grid_mid):
        # <[x, p]> = i / pi on states far from the grid edge.
        x = np.diag(grid_mid.x).astype(complex)
        p = momentum_operator(grid_mid)
        psi = gaussian(grid_mid, center=0.3, width=0.8)
        comm = x @ (p @ psi) - p @ (x @ psi)
        val = np.vdot(psi, comm)
        assert abs(val - 1j / np.pi) < 1e-6


class TestLCJHamiltonian:
    def test_hermitian(self, grid_mid):
        h = hamiltonian_lcj(grid_mid, 2.5, constants.matched_capacitance(2.5), 150.0)
        quadratures.assert_hermitian(h, tol=1e-10)

    def test_harmonic_spectrum_at_zero_junction(self, grid_mid):
        # J = 0 leaves an LC oscillator: uniform level spacing h f_LC.
        l_uh = 2.5
        c_ff = constants.matched_capacitance(l_uh)
        h = hamiltonian_lcj(grid_mid, l_uh, c_ff, 0.0)
        ev = np.linalg.eigvalsh(h)
        f_lc = constants.lc_frequency(l_uh, c_ff)
        spacings = np.diff(ev[:8])
        np.testing.assert_allclose(spacings, f_lc, rtol=1e-3)

    def test_band_gap_matches_well_spacing(self, grid_mid):
        # Pure junction (no inductor): one state per well in the ground
        # band, then a gap of roughly eps_0 to the first excited band.
        c_ff = constants.matched_capacitance(2.5)
        h = hamiltonian_lcj(grid_mid, np.inf, c_ff, 150.0)
        ev = np.linalg.eigvalsh(h)
        n_wells = 2 * grid_mid.half_range
        gap = ev[n_wells] - ev[0]
        f_equiv = (2.0 / np.pi) * constants.charging_energy(c_ff)
        eps0 = constants.well_spacing(f_equiv, 150.0)
        assert abs(gap - eps0) < 0.05 * eps0
        # Ground band is nearly flat: tunneling is exponentially small.
        assert ev[n_wells - 1] - ev[0] < 1e-6 * eps0

    def test_resolution_guard(self):
        g = build_grid(256, 12)  # dx = 0.094, far beyond lam0 / 2
        with pytest.raises(GridResolutionError):
            hamiltonian_lcj(g, 2.5, constants.matched_capacitance(2.5), 150.0)

    def test_doubling_converges_low_spectrum(self):
        l_uh = 2.40
        c_ff = constants.matched_capacitance(l_uh)
        ev1 = np.linalg.eigvalsh(
            hamiltonian_lcj(build_grid(1024, 12), l_uh, c_ff, 150.0)
        )
        ev2 = np.linalg.eigvalsh(
            hamiltonian_lcj(build_grid(2048, 12), l_uh, c_ff, 150.0)
        )
        scale = ev1[40] - ev1[0]
        rel = np.abs(ev1[:40] - ev2[:40]) / scale
        assert np.max(rel) < 1e-6


class TestQuarticHamiltonian:
    def test_well_energies_follow_quartic(self, grid_mid):
        # Well N sits at eps_4 N**4 relative to well 0, up to zero-point
        # corrections second order in lam0.
        c_ff = constants.matched_capacitance(2.5)
        eps4 = -1e-3
        h = hamiltonian_quartic(grid_mid, c_ff, 150.0, eps4)
        eig = diagonalize(h)
        f_equiv = (2.0 / np.pi) * constants.charging_energy(c_ff)
        lam0 = constants.zero_point_width(f_equiv, 150.0)
        # Identify well states by overlap with Gaussians on integer flux.
        for n in (1, 2, 3):
            tooth = np.exp(
                -((grid_mid.x - n) ** 2) / (2.0 * lam0**2)
            )
            tooth /= np.linalg.norm(tooth)
            overlaps = np.abs(eig.vectors[:, :40].conj().T @ tooth) ** 2
            e_n = eig.energies[int(np.argmax(overlaps))]
            tooth0 = np.exp(-(grid_mid.x**2) / (2.0 * lam0**2))
            tooth0 /= np.linalg.norm(tooth0)
            e_0 = eig.energies[
                int(np.argmax(np.abs(eig.vectors[:, :40].conj().T @ tooth0) ** 2))
            ]
            expected = eps4 * n**4
            assert abs((e_n - e_0) - expected) < 0.05 * abs(expected)

    def test_spectrum_parity_invariant(self, grid_mid):
        c_ff = constants.matched_capacitance(2.5)
        h = hamiltonian_quartic(grid_mid, c_ff, 150.0, -1e-4)
        # Conjugate by grid inversion x -> -x: j -> (-j) mod d.
        perm = (-np.arange(grid_mid.d)) % grid_mid.d
        h_mirror = h[np.ix_(perm, perm)]
        ev = np.linalg.eigvalsh(h)
        ev_m = np.linalg.eigvalsh(h_mirror)
        np.testing.assert_allclose(ev, ev_m, atol=1e-9)


class TestEffectiveHamiltonian:
    def test_empty_coefficients_reduce_to_lcj(self, grid_mid):
        c_ff = constants.matched_capacitance(2.5)
        h0 = hamiltonian_lcj(grid_mid, 2.5, c_ff, 150.0)
        h1 = hamiltonian_effective(grid_mid, 2.5, c_ff, 150.0, {})
        np.testing.assert_array_equal(h0, h1)

    def test_quartic_limit_matches(self, grid_mid):
        c_ff = constants.matched_capacitance(2.5)
        hq = hamiltonian_quartic(grid_mid, c_ff, 150.0, -2e-4)
        he = hamiltonian_effective(grid_mid, np.inf, c_ff, 150.0, {4: -2e-4})
        np.testing.assert_allclose(he, hq, atol=1e-14)

    def test_quadratic_excess_shifts_ladder(self, grid_mid):
        # Adding V_2 changes the inter-well ladder coefficient by V_2:
        # compare E(N=1) - E(N=0) with and without the excess.
        l_uh = 2.5
        c_ff = constants.matched_capacitance(l_uh)
        v2 = 5e-3

        def ladder(h):
            eig = diagonalize(h)
            f_lc = constants.lc_frequency(l_uh, c_ff)
            lam0 = constants.zero_point_width(f_lc, 150.0)
            tooth0 = np.exp(-(grid_mid.x**2) / (2.0 * lam0**2))
            tooth1 = np.exp(-((grid_mid.x - 1.0) ** 2) / (2.0 * lam0**2))
            es = []
            for tooth in (tooth0, tooth1):
                tooth = tooth / np.linalg.norm(tooth)
                ov = np.abs(eig.vectors[:, :20].conj().T @ tooth) ** 2
                es.append(eig.energies[int(np.argmax(ov))])
            return es[1] - es[0]

        base = ladder(hamiltonian_lcj(grid_mid, l_uh, c_ff, 150.0))
        shifted = ladder(hamiltonian_effective(grid_mid, l_uh, c_ff, 150.0, {2: v2}))
        assert abs((shifted - base) - v2) < 0.01 * v2

    def test_rejects_bad_order(self, grid_mid):
        with pytest.raises(ValueError):
            hamiltonian_effective(
                grid_mid, 2.5, constants.matched_capacitance(2.5), 150.0, {2.5: 1e-3}
            )


class TestPropagator:
    def test_identity_at_zero_time(self, grid_small):
        h = hamiltonian_lcj(grid_small, 2.5, constants.matched_capacitance(2.5), 0.0)
        u = propagator(h, 0.0)
        np.testing.assert_allclose(u, np.eye(grid_small.d), atol=1e-12)

    def test_composition(self, grid_small):
        h = hamiltonian_lcj(grid_small, 2.5, constants.matched_capacitance(2.5), 0.0)
        eig = diagonalize(h)
        u1 = eig.propagator(0.17)
        u2 = eig.propagator(0.05)
        u12 = eig.propagator(0.22)
        np.testing.assert_allclose(u1 @ u2, u12, atol=1e-10)

    def test_quarter_period_rotates_quadratures(self, grid_small):
        # A quarter LC period maps (<x>, <p>) = (d, 0) to (0, -d).
        l_uh = 2.5
        c_ff = constants.matched_capacitance(l_uh)
        h = hamiltonian_lcj(grid_small, l_uh, c_ff, 0.0)
        eig = diagonalize(h)
        f_lc = constants.lc_frequency(l_uh, c_ff)
        psi = gaussian(grid_small, center=1.3, width=0.4)
        out = eig.evolve(psi, 1.0 / (4.0 * f_lc))
        p = momentum_operator(grid_small)
        x_out = np.vdot(out, grid_small.x * out).real
        p_out = np.vdot(out, p @ out).real
        assert abs(x_out) < 1e-9
        assert abs(p_out + 1.3) < 1e-9

    def test_evolve_matches_matrix(self, grid_small, rng):
        h = hamiltonian_lcj(grid_small, 2.5, constants.matched_capacitance(2.5), 20.0)
        eig = diagonalize(h)
        psi = rng.normal(size=grid_small.d) + 1j * rng.normal(size=grid_small.d)
        psi /= np.linalg.norm(psi)
        np.testing.assert_allclose(
            eig.evolve(psi, 0.4), eig.propagator(0.4) @ psi, atol=1e-10
        )


class TestStabilizerCommutation:
    def test_flux_and_charge_combs_commute(self, grid_small):
        # With 2 / dx an integer the period-2 charge displacement is an
        # exact grid translation, so the two stabilizers commute.
        f = dft_matrix(grid_small)
        s1 = np.diag(np.cos(2.0 * np.pi * grid_small.x)).astype(complex)
        s2 = f.conj().T @ (np.cos(2.0 * np.pi * grid_small.p)[:, None] * f)
        comm = s1 @ s2 - s2 @ s1
        assert np.max(np.abs(comm)) < 1e-9
