"""Pink flux noise on the main loop and its segment-wise integrals.

A noise realization is a convolution of standard-normal weights on a
two-piece time grid with the analytic kernel g, the Fourier transform
of the square-root spectral density. The fine subgrid carries the
ultraviolet structure across the evaluation window; the coarse subgrid
carries the infrared tail out to the inverse low-frequency cutoff. The
literal fine grid of the construction (out to one second) is
computationally impossible, so subgrid A stops a guard band past the
evaluation window and the slow components ride on subgrid B.

Times inside signals are nanoseconds to match the propagators; the
spectral machinery works in seconds and rad/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.integrate
import scipy.interpolate
import scipy.special

from . import constants

NS_PER_S = 1e9


@dataclass(frozen=True)
class NoiseSpectrum:
    """1/f spectrum S(w) = gamma_phi J(w), J = Omega e^{-|w|/uv}/(|w|+ir).

    gamma_phi is quoted in phi0^2/THz; omega_ref, omega_ir and omega_uv
    are angular rates (rad/s).
    """

    gamma_phi: float
    omega_ref: float = 2.0 * np.pi
    omega_ir: float = 1e-4
    omega_uv: float = 1e6

    def __post_init__(self) -> None:
        if self.gamma_phi < 0.0:
            raise ValueError("noise strength must be nonnegative")
        if self.omega_ir <= 0.0 or self.omega_uv <= self.omega_ir:
            raise ValueError("cutoffs must satisfy 0 < omega_ir < omega_uv")

    def j_tilde(self, omega):
        """Normalized spectral shape, even in omega."""
        w = np.abs(np.asarray(omega, dtype=float))
        return self.omega_ref * np.exp(-w / self.omega_uv) / (w + self.omega_ir)

    @property
    def amplitude(self) -> float:
        # phi0^2/THz -> phi0^2 s, then the 1/sqrt(2 pi) of the unitary
        # transform pair used by the kernel.
        return math.sqrt(self.gamma_phi * 1e-12 / (2.0 * np.pi))

    def variance_target(self) -> float:
        """Ensemble <xi^2> implied by the spectrum, (1/2pi) int_0^inf J."""
        val, _ = scipy.integrate.quad(
            self.j_tilde, 0.0, np.inf, limit=400
        )
        return self.gamma_phi * 1e-12 * val / (2.0 * np.pi)


def jump_correlator(t_s, spectrum: NoiseSpectrum):
    """g(t) = (1/sqrt(2 pi)) int sqrt(J(w)) e^{-iwt} dw, in 1/sqrt(s).

    Closed form via the scaled complementary error function, stable for
    the whole lag range of the grids; even and real.
    """
    t = np.asarray(t_s, dtype=float)
    p = 1j * t + 0.5 / spectrum.omega_uv
    root_p = np.sqrt(p)
    val = np.sqrt(2.0 * spectrum.omega_ref) * (
        scipy.special.wofz(1j * np.sqrt(spectrum.omega_ir) * root_p) / root_p
    ).real
    return val if val.ndim else float(val)


@dataclass(frozen=True)
class NoiseGrid:
    """Union of a fine UV subgrid and a coarse IR subgrid (seconds)."""

    times_a: np.ndarray
    times_b: np.ndarray
    dt_a: float
    dt_b: float

    @classmethod
    def build(
        cls,
        spectrum: NoiseSpectrum,
        window_s: float = 1e-4,
        coarse_start_s: float = 1.0,
        dt_b: float = 0.4,
        guard_points: float = 1e3,
    ) -> "NoiseGrid":
        if window_s <= 0.0:
            raise ValueError("window must be positive")
        dt_a = 0.5 / spectrum.omega_uv
        end_a = window_s + guard_points / spectrum.omega_uv
        start_b = max(coarse_start_s, end_a + dt_b)
        end_b = 1.0 / spectrum.omega_ir
        if end_b <= start_b:
            raise ValueError("IR cutoff leaves no room for the coarse subgrid")
        times_a = np.arange(0.0, end_a, dt_a)
        times_b = np.arange(start_b, end_b, dt_b)
        return cls(times_a=times_a, times_b=times_b, dt_a=dt_a, dt_b=dt_b)

    @property
    def times(self) -> np.ndarray:
        return np.concatenate([self.times_a, self.times_b])

    @property
    def weights(self) -> np.ndarray:
        # Trapezoid end corrections keep the quadrature honest at the
        # subgrid edges, where g^2 still carries real weight.
        wa = np.full(self.times_a.shape, self.dt_a)
        wa[0] *= 0.5
        wa[-1] *= 0.5
        wb = np.full(self.times_b.shape, self.dt_b)
        wb[0] *= 0.5
        wb[-1] *= 0.5
        return np.concatenate([wa, wb])

    @property
    def size(self) -> int:
        return self.times_a.size + self.times_b.size

    @property
    def coverage_s(self) -> float:
        return float(self.times_b[-1]) if self.times_b.size else float(self.times_a[-1])


DEFAULT_EVAL_POINTS = 101
DEFAULT_WINDOW_S = 1e-4


def default_eval_times_ns(
    window_s: float = DEFAULT_WINDOW_S, n: int = DEFAULT_EVAL_POINTS
) -> np.ndarray:
    return np.linspace(0.0, window_s * NS_PER_S, n)


@dataclass(frozen=True, eq=False)
class NoiseSignal:
    """One flux-noise realization, cubic-interpolated between samples.

    times_ns ascend; values are in units of phi0. Evaluation and
    integration outside the sampled window raise, since the generating
    grids only guarantee coverage there.
    """

    times_ns: np.ndarray
    values: np.ndarray
    seed: object
    grid_note: str

    def __post_init__(self) -> None:
        spline = scipy.interpolate.CubicSpline(self.times_ns, self.values)
        object.__setattr__(self, "_spline", spline)

    def _check(self, lo: float, hi: float) -> None:
        if lo < self.times_ns[0] - 1e-9 or hi > self.times_ns[-1] + 1e-9:
            raise ValueError(
                f"times [{lo}, {hi}] ns outside the sampled window "
                f"[{self.times_ns[0]}, {self.times_ns[-1]}] ns"
            )

    def __call__(self, t_ns):
        arr = np.asarray(t_ns, dtype=float)
        self._check(float(arr.min()), float(arr.max()))
        return self._spline(t_ns)

    def integral_ns(self, t1_ns: float, t2_ns: float) -> float:
        """int xi dt in phi0 ns over [t1, t2]."""
        self._check(min(t1_ns, t2_ns), max(t1_ns, t2_ns))
        return float(self._spline.integrate(t1_ns, t2_ns))


class NoiseKernel:
    """Precomputed convolution kernel for fixed grid and eval times.

    Building the kernel is the expensive part (one correlator call per
    eval-time/grid-point pair); sampling a realization afterwards is a
    single matrix-vector product, so sweeps reuse one kernel across
    seeds.
    """

    def __init__(
        self,
        spectrum: NoiseSpectrum,
        grid: NoiseGrid,
        times_ns: np.ndarray,
    ) -> None:
        times_ns = np.asarray(times_ns, dtype=float)
        if times_ns.ndim != 1 or times_ns.size < 2:
            raise ValueError("need at least two evaluation times")
        if np.any(np.diff(times_ns) <= 0.0):
            raise ValueError("evaluation times must ascend")
        if times_ns[-1] / NS_PER_S > grid.coverage_s:
            raise ValueError("evaluation window exceeds grid coverage")
        self.spectrum = spectrum
        self.grid = grid
        self.times_ns = times_ns
        lags = times_ns[:, None] / NS_PER_S - grid.times[None, :]
        self._matrix = jump_correlator(lags, spectrum) * np.sqrt(grid.weights)[None, :]

    def sample(self, seed, spectrum: NoiseSpectrum | None = None) -> NoiseSignal:
        """Draw one realization; spectrum only rescales the amplitude.

        The kernel matrix is strength-independent, so one kernel serves
        a whole sweep over gamma_phi.
        """
        spec = self.spectrum if spectrum is None else spectrum
        rng = np.random.default_rng(seed)
        chi = rng.standard_normal(self.grid.size)
        values = spec.amplitude * (self._matrix @ chi)
        note = (
            f"A: {self.grid.times_a.size} pts at {self.grid.dt_a:g} s, "
            f"B: {self.grid.times_b.size} pts at {self.grid.dt_b:g} s"
        )
        return NoiseSignal(
            times_ns=self.times_ns, values=values, seed=seed, grid_note=note
        )

    def lag_zero_expectation(self, spectrum: NoiseSpectrum | None = None) -> np.ndarray:
        """Exact <xi(t_i)^2> of the construction, per eval time."""
        spec = self.spectrum if spectrum is None else spectrum
        return spec.gamma_phi * 1e-12 / (2.0 * np.pi) * np.einsum(
            "im,im->i", self._matrix, self._matrix
        )


@lru_cache(maxsize=8)
def _cached_kernel(
    cutoffs: tuple, window_s: float, n_points: int
) -> NoiseKernel:
    spectrum = NoiseSpectrum(1.0, *cutoffs)
    grid = NoiseGrid.build(spectrum, window_s=window_s)
    return NoiseKernel(spectrum, grid, default_eval_times_ns(window_s, n_points))


def generate_signal(
    spectrum: NoiseSpectrum,
    seed,
    times_ns: np.ndarray | None = None,
    grid: NoiseGrid | None = None,
) -> NoiseSignal:
    """One realization on the default or a caller-supplied layout."""
    if spectrum.gamma_phi == 0.0:
        t = default_eval_times_ns() if times_ns is None else np.asarray(times_ns, float)
        return NoiseSignal(
            times_ns=t, values=np.zeros_like(t), seed=seed, grid_note="zero strength"
        )
    if times_ns is None and grid is None:
        key = (spectrum.omega_ref, spectrum.omega_ir, spectrum.omega_uv)
        kernel = _cached_kernel(key, DEFAULT_WINDOW_S, DEFAULT_EVAL_POINTS)
        return kernel.sample(seed, spectrum)
    times_ns = default_eval_times_ns() if times_ns is None else times_ns
    if grid is None:
        grid = NoiseGrid.build(spectrum, window_s=float(times_ns[-1]) / NS_PER_S)
    return NoiseKernel(spectrum, grid, times_ns).sample(seed)


def generate_dense_signal(
    spectrum: NoiseSpectrum,
    seed,
    window_s: float,
    dt_s: float,
    n_coarse: int = 129,
) -> tuple[np.ndarray, np.ndarray]:
    """Uniformly sampled realization for spectral estimation.

    The fine-subgrid convolution runs through an FFT at the native grid
    spacing and is then decimated to dt_s; the coarse subgrid enters as
    a slow drift, evaluated exactly at n_coarse anchors and upsampled
    with a cubic. Returns (times_s, values).
    """
    if spectrum.gamma_phi < 0.0:
        raise ValueError("noise strength must be nonnegative")
    grid = NoiseGrid.build(spectrum, window_s=window_s)
    step = int(round(dt_s / grid.dt_a))
    if step < 1 or abs(step * grid.dt_a - dt_s) > 1e-12 * dt_s:
        raise ValueError("dt_s must be a positive multiple of the fine spacing")
    rng = np.random.default_rng(seed)
    chi = rng.standard_normal(grid.size)

    n_out = int(math.floor(window_s / dt_s)) + 1
    times = np.arange(n_out) * dt_s

    # Fine part: xi_A(t_i) = sum_j g(t_i - s_j) chi_j sqrt(w_j) is a
    # linear convolution because both sets share the same spacing:
    # with g_axis[k] = g((k - na + 1) dt_a), the term for sample i and
    # grid point j sits at convolution index na - 1 + i step.
    na = grid.times_a.size
    lag_min = -grid.times_a[-1]
    lag_axis = np.arange(na + (n_out - 1) * step) * grid.dt_a + lag_min
    g_axis = jump_correlator(lag_axis, spectrum)
    chi_a = chi[:na] * np.sqrt(grid.weights[:na])
    n_fft = int(2 ** math.ceil(math.log2(g_axis.size + na)))
    conv = np.fft.irfft(
        np.fft.rfft(chi_a, n_fft) * np.fft.rfft(g_axis, n_fft), n_fft
    )
    fine = conv[na - 1 : na - 1 + (n_out - 1) * step + 1 : step]

    # Coarse part varies on second scales; a handful of anchors suffice.
    anchors = np.linspace(0.0, window_s, n_coarse)
    lags_b = anchors[:, None] - grid.times_b[None, :]
    kb = jump_correlator(lags_b, spectrum) * np.sqrt(grid.weights[na:])[None, :]
    slow = scipy.interpolate.CubicSpline(anchors, kb @ chi[na:])(times)

    return times, spectrum.amplitude * (fine + slow)


def integrate_alpha(
    signal: NoiseSignal, t1_ns: float, t2_ns: float, eps_l_hghz: float
) -> float:
    """Flux-displacement phase over [t1, t2], for exp(-i alpha x)."""
    if t2_ns < t1_ns:
        raise ValueError("segment must run forward in time")
    return 4.0 * np.pi * eps_l_hghz * signal.integral_ns(t1_ns, t2_ns)


def impedance_ratio(l_uh: float, c_ff: float) -> float:
    """Oscillator impedance in quantum-resistance units for pairs."""
    return 2.0 * math.sqrt((l_uh * 1e-6) / (c_ff * 1e-15)) / constants.R_LC


_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class FreeSegmentKick:
    """Coefficients of the exact free-flight noise unitary.

    U = exp(-i 2 pi H_LC t) exp(-i a p) exp(-i b x) exp(-i phase),
    with the displacement factors acting before the oscillator turn.
    """

    a: float
    b: float
    phase: float


def free_segment_kick(
    signal: NoiseSignal,
    t0_ns: float,
    dt_ns: float,
    l_uh: float,
    c_ff: float,
) -> FreeSegmentKick:
    """Accumulated noise displacement over one free oscillator segment.

    The quadrature integrals run over the segment-local clock; Gauss
    nodes resolve the oscillator period, which is far shorter than the
    noise sample spacing.
    """
    if dt_ns < 0.0:
        raise ValueError("segment must run forward in time")
    f_lc = constants.lc_frequency(l_uh, c_ff)
    eps_l = constants.inductive_energy(l_uh)
    nu = impedance_ratio(l_uh, c_ff)
    tau = 0.5 * dt_ns * (_GAUSS_NODES + 1.0)
    w = 0.5 * dt_ns * _GAUSS_WEIGHTS
    xi = signal(t0_ns + tau)
    phase_arg = 2.0 * np.pi * f_lc * tau
    a = 2.0 * np.pi * nu * eps_l * float(np.dot(w, np.sin(phase_arg) * xi))
    b = 4.0 * np.pi * eps_l * float(np.dot(w, np.cos(phase_arg) * xi))
    return FreeSegmentKick(a=a, b=b, phase=a * b / (2.0 * np.pi))
