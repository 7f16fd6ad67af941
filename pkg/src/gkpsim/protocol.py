"""Gate schedules, timing calibration and the trajectory engine.

A gate run is an ordered list of segments, each evolving the state
under one of three Hamiltonians: the stabilized circuit ("lcj"), the
bare oscillator with the junction switched off ("lc"), or the quartic
gate circuit ("quartic").  Dissipation acts only while the junction
drive is on, so Stabilizer, Phi4 and Phi2 segments are dissipative and
the free-flight segments are unitary.

Segment timings come from the spectrum of the discretized Hamiltonians
rather than the design formulas: the per-well phase rates are read off
the eigenvalues and the quartic duration is set so neighboring wells
pick up exactly pi/8, with the Phi2 segment completing the quadratic
phase to a full turn.  Using the design rates instead leaves tens of
radians of quadratic phase slip over a gate.

The stochastic engine unravels the master equation with the
waiting-time scheme: evolve under the non-Hermitian effective
Hamiltonian through cached dyadic propagators, trigger a jump when the
squared norm crosses a uniform threshold, and locate the crossing by
splitting the last step in half until the base resolution is reached.
"""

from __future__ import annotations

import enum
import math
import threading
from collections.abc import Mapping
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from . import constants
from .dissipation import JumpOperator, effective_hamiltonian
from .fluxnoise import NoiseSignal, free_segment_kick, integrate_alpha
from .logical import cleanup_map, rotate_z, well_state
from .quadratures import (
    EigenSystem,
    QuadratureGrid,
    diagonalize,
    from_charge_basis,
    normalize,
    to_charge_basis,
)


class LeakageError(RuntimeError):
    """State reached the edge of the quadrature grid."""


class SegmentKind(enum.Enum):
    STABILIZER = "stabilizer"
    FREE = "free"
    HALF_FREE = "half_free"
    PHI4 = "phi4"
    PHI2 = "phi2"


_KIND_HAMILTONIAN = {
    SegmentKind.STABILIZER: "lcj",
    SegmentKind.FREE: "lc",
    SegmentKind.HALF_FREE: "lc",
    SegmentKind.PHI4: "quartic",
    SegmentKind.PHI2: "lcj",
}
_DISSIPATIVE_KINDS = frozenset(
    {SegmentKind.STABILIZER, SegmentKind.PHI4, SegmentKind.PHI2}
)


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    duration_ns: float
    hamiltonian: str
    dissipative: bool

    def __post_init__(self) -> None:
        if not (self.duration_ns > 0.0 and math.isfinite(self.duration_ns)):
            raise ValueError(
                f"{self.kind.value} segment needs a positive duration, "
                f"got {self.duration_ns}"
            )


def segment(kind: SegmentKind, duration_ns: float) -> Segment:
    """Segment with the Hamiltonian and dissipation implied by its kind."""
    return Segment(
        kind=kind,
        duration_ns=duration_ns,
        hamiltonian=_KIND_HAMILTONIAN[kind],
        dissipative=kind in _DISSIPATIVE_KINDS,
    )


@dataclass(frozen=True)
class GateTimings:
    """Segment durations of the protocol (ns).

    free_ns is a quarter oscillator period, the half-period separator
    used between quartic sub-segments is twice that.  The rate dicts
    hold the fitted per-well energy coefficients when the timings come
    from a spectral calibration.
    """

    t4_ns: float
    t2_ns: float
    t_rev_ns: float
    free_ns: float
    lcj_rates: dict | None = None
    gate_rates: dict | None = None

    def __post_init__(self) -> None:
        for name in ("t4_ns", "t2_ns", "t_rev_ns", "free_ns"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive, got {value}")

    @property
    def half_ns(self) -> float:
        return 2.0 * self.free_ns


def nominal_timings(scales) -> GateTimings:
    """Design-formula timings from a DerivedScales with gate times set."""
    if scales.t4 is None or scales.t2 is None:
        raise ValueError("scales carry no gate times; fit the potential first")
    return GateTimings(
        t4_ns=scales.t4,
        t2_ns=scales.t2,
        t_rev_ns=scales.t_rev,
        free_ns=0.25 / scales.f_lc,
    )


def well_energy_rates(
    grid: QuadratureGrid,
    eigen: EigenSystem,
    lam0: float,
    n_max: int = 8,
    k_fit: int = 8,
    n_scan: int = 256,
) -> tuple[dict[int, float], float]:
    """Even-polynomial well-energy coefficients from the spectrum.

    For each well index N the eigenstate with the largest overlap
    against the local Gaussian ground state is selected, and the
    eigenvalues are fitted as E_N = sum_k c_k N^k (even k <= k_fit).
    Returns ({k: c_k}, max fit residual in h GHz).
    """
    if n_max < 2 or int(n_max) != n_max:
        raise ValueError(f"need at least wells 0..2, got n_max = {n_max}")
    if n_max > grid.half_range - 2:
        raise ValueError(
            f"wells out to {n_max} do not fit a grid of half range "
            f"{grid.half_range}"
        )
    if k_fit < 4 or k_fit % 2 != 0:
        raise ValueError(f"fit order must be even and >= 4, got {k_fit}")
    if n_max + 1 <= k_fit // 2 + 1:
        raise ValueError("more fit coefficients than well energies")

    ns = np.arange(0, n_max + 1)
    teeth = np.stack([well_state(grid, int(n), lam0) for n in ns], axis=1)
    n_scan = min(n_scan, grid.d)
    overlap = np.abs(eigen.vectors[:, :n_scan].conj().T @ teeth) ** 2
    picked = np.argmax(overlap, axis=0)
    best = overlap[picked, np.arange(ns.size)]
    # Degenerate +-N pairs split the weight between symmetric combos,
    # so 1/2 is the healthy floor; much less means the Gaussian ansatz
    # missed the well ground state.
    if np.any(best < 0.2):
        raise ValueError(
            f"well ground states not resolved: min overlap {best.min():.3f}"
        )
    if len(set(picked.tolist())) < ns.size:
        raise ValueError("well-state matching collided on an eigenstate")

    energies = eigen.energies[picked]
    orders = np.arange(0, k_fit + 1, 2)
    design = np.stack([(ns / n_max) ** k for k in orders], axis=1)
    coeffs, *_ = np.linalg.lstsq(design, energies, rcond=None)
    residual = float(np.max(np.abs(design @ coeffs - energies)))
    return {int(k): c / n_max**k for k, c in zip(orders, coeffs)}, residual


def calibrate_timings(
    grid: QuadratureGrid,
    lcj_eigen: EigenSystem,
    gate_eigen: EigenSystem,
    lam0: float,
    f_lc: float,
    n_max: int = 8,
) -> GateTimings:
    """Gate timings from the spectra of the discretized Hamiltonians.

    The quartic duration makes the N^4 phase difference between parity
    classes exactly pi/8; the Phi2 duration completes the quadratic
    phase accumulated meanwhile to a whole turn, and the revival time
    is a quarter turn of the stabilized circuit's own quadratic rate.
    """
    lcj_rates, _ = well_energy_rates(grid, lcj_eigen, lam0, n_max=n_max)
    gate_rates, _ = well_energy_rates(grid, gate_eigen, lam0, n_max=n_max)
    if gate_rates[4] == 0.0:
        raise ValueError("gate spectrum has no quartic component")
    if lcj_rates[2] <= 0.0:
        raise ValueError("stabilized spectrum has no quadratic confinement")
    t4 = 1.0 / (16.0 * abs(gate_rates[4]))
    turns = gate_rates[2] * t4
    t2 = (math.floor(turns) + 1.0 - turns) / lcj_rates[2]
    return GateTimings(
        t4_ns=t4,
        t2_ns=t2,
        t_rev_ns=0.25 / lcj_rates[2],
        free_ns=0.25 / f_lc,
        lcj_rates=lcj_rates,
        gate_rates=gate_rates,
    )


@dataclass(frozen=True)
class Schedule:
    """Ordered segments plus the knobs that generated them.

    jitter_ns records the signed draw applied to each segment; all
    zeros until apply_timing_jitter produces a perturbed copy.
    """

    segments: tuple[Segment, ...]
    n_dd: int
    cleanup_steps: int
    jitter_ns: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.jitter_ns) != len(self.segments):
            raise ValueError("one jitter entry per segment required")

    @property
    def total_ns(self) -> float:
        return float(sum(seg.duration_ns for seg in self.segments))

    def hamiltonian_ids(self) -> set[str]:
        return {seg.hamiltonian for seg in self.segments}


def _cleanup_cycle(timings: GateTimings) -> list[Segment]:
    return [
        segment(SegmentKind.STABILIZER, timings.t_rev_ns),
        segment(SegmentKind.FREE, timings.free_ns),
    ]


def udd_boundaries(t4_ns: float, n_dd: int) -> np.ndarray:
    """Pulse times 0 = tau_0 < ... < tau_{N+1} = t4 of the echo sequence."""
    j = np.arange(n_dd + 2)
    bounds = t4_ns * np.sin(j * np.pi / (2.0 * n_dd + 2.0)) ** 2
    bounds[-1] = t4_ns
    return bounds


def build_tgate_schedule(
    timings: GateTimings, n_dd: int, cleanup_steps: int = 0
) -> Schedule:
    """Quartic segment with echo separators, phase completion, cleanup.

    The quartic duration is split at the echo boundaries into n_dd + 1
    sub-segments with half-period free flights between them, followed
    by the Phi2 completion and cleanup_steps stabilization cycles.
    """
    if n_dd < 0 or int(n_dd) != n_dd:
        raise ValueError(f"echo pulse count must be a whole number, got {n_dd}")
    if cleanup_steps < 0 or int(cleanup_steps) != cleanup_steps:
        raise ValueError(f"cleanup steps must be a whole number, got {cleanup_steps}")
    bounds = udd_boundaries(timings.t4_ns, int(n_dd))
    segments: list[Segment] = []
    for i, duration in enumerate(np.diff(bounds)):
        segments.append(segment(SegmentKind.PHI4, float(duration)))
        if i < n_dd:
            segments.append(segment(SegmentKind.HALF_FREE, timings.half_ns))
    segments.append(segment(SegmentKind.PHI2, timings.t2_ns))
    for _ in range(int(cleanup_steps)):
        segments.extend(_cleanup_cycle(timings))
    return Schedule(
        segments=tuple(segments),
        n_dd=int(n_dd),
        cleanup_steps=int(cleanup_steps),
        jitter_ns=(0.0,) * len(segments),
    )


def build_stabilization_schedule(timings: GateTimings, cycles: int) -> Schedule:
    """Cleanup cycles only, for settling a freshly constructed state."""
    if cycles < 1 or int(cycles) != cycles:
        raise ValueError(f"need at least one cycle, got {cycles}")
    segments: list[Segment] = []
    for _ in range(int(cycles)):
        segments.extend(_cleanup_cycle(timings))
    return Schedule(
        segments=tuple(segments),
        n_dd=0,
        cleanup_steps=int(cycles),
        jitter_ns=(0.0,) * len(segments),
    )


def apply_timing_jitter(
    schedule: Schedule, window_ns: float, seed, resolution_ns: float = 1e-4
) -> Schedule:
    """Independent duration errors drawn uniformly from +-window/2.

    Phi4 sub-segments and the Phi2 segment are jittered independently;
    each cleanup stabilizer draw is compensated by its free segment so
    the cycle period stays fixed.  Draws are quantized to the
    propagator step lattice, which keeps jittered durations exactly
    composable from cached steps.
    """
    if window_ns < 0.0:
        raise ValueError(f"jitter window must be nonnegative, got {window_ns}")
    if window_ns == 0.0:
        return schedule
    rng = np.random.default_rng(seed)
    half_steps = int(math.floor(0.5 * window_ns / resolution_ns))
    draws = [0.0] * len(schedule.segments)
    for i, seg in enumerate(schedule.segments):
        if seg.kind in (SegmentKind.PHI4, SegmentKind.PHI2):
            draws[i] = resolution_ns * float(rng.integers(-half_steps, half_steps + 1))
        elif seg.kind is SegmentKind.STABILIZER:
            delta = resolution_ns * float(rng.integers(-half_steps, half_steps + 1))
            draws[i] = delta
            follower = i + 1
            if (
                follower < len(schedule.segments)
                and schedule.segments[follower].kind is SegmentKind.FREE
            ):
                draws[follower] = -delta
    new_segments = []
    for seg, d in zip(schedule.segments, draws):
        duration = seg.duration_ns + d
        if duration <= 0.0:
            raise ValueError(
                f"jitter drove a {seg.kind.value} segment to {duration} ns"
            )
        new_segments.append(replace(seg, duration_ns=duration))
    return replace(
        schedule, segments=tuple(new_segments), jitter_ns=tuple(draws)
    )


def ideal_bloch_target(schedule: Schedule, bloch) -> np.ndarray:
    """Noiseless logical action of a built schedule on a Bloch vector.

    The full quartic-plus-completion block is an eighth turn about z;
    echo separators act trivially on the logicals; every cleanup cycle
    applies the frame permutation (x, y, z) -> (z, x, y).
    """
    out = np.asarray(bloch, dtype=float)
    if any(seg.kind is SegmentKind.PHI4 for seg in schedule.segments):
        out = rotate_z(out, np.pi / 8.0)
    for _ in range(schedule.cleanup_steps):
        out = cleanup_map(out)
    return out


@dataclass(frozen=True)
class SseConfig:
    """Trajectory-engine knobs.

    Durations are rounded to the delta_ns lattice, so every segment is
    composable from the dyadic propagator set {U(2^k delta)}; k_max
    caps the largest cached step and max_step_ns optionally caps the
    stride between norm checks.
    """

    seed: object = None
    delta_ns: float = 1e-4
    k_max: int = 20
    max_step_ns: float | None = None
    leakage_tol: float = 1e-8

    def __post_init__(self) -> None:
        if not (self.delta_ns > 0.0 and math.isfinite(self.delta_ns)):
            raise ValueError(f"step resolution must be positive, got {self.delta_ns}")
        if self.k_max < 0 or int(self.k_max) != self.k_max:
            raise ValueError(f"ladder height must be a whole number, got {self.k_max}")
        if self.max_step_ns is not None and self.max_step_ns < self.delta_ns:
            raise ValueError("max step smaller than the base resolution")
        if not 0.0 < self.leakage_tol <= 1.0:
            raise ValueError(f"leakage tolerance out of range: {self.leakage_tol}")

    @property
    def k_cap(self) -> int:
        if self.max_step_ns is None:
            return int(self.k_max)
        return min(
            int(self.k_max),
            int(math.floor(math.log2(self.max_step_ns / self.delta_ns))),
        )


class PropagatorCache:
    """Dyadic propagators U(2^k delta) of one (possibly non-Hermitian) H.

    Rungs are built on demand by repeated squaring of the base
    exponential; exact-duration matrices compose the binary expansion
    and close the sub-delta remainder with one direct exponential.
    Thread-safe and write-once, so concurrent trajectories share it.
    """

    def __init__(self, h: np.ndarray, delta_ns: float = 1e-4, k_max: int = 20):
        if not (delta_ns > 0.0 and math.isfinite(delta_ns)):
            raise ValueError(f"step resolution must be positive, got {delta_ns}")
        self._h = np.asarray(h, dtype=complex)
        self.delta_ns = float(delta_ns)
        self.k_max = int(k_max)
        self._rungs: list[np.ndarray] = []
        self._matrices: dict[float, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def n_rungs(self) -> int:
        return len(self._rungs)

    def steps(self, duration_ns: float) -> int:
        """Duration on the delta lattice, round half away from the gate."""
        return int(round(duration_ns / self.delta_ns))

    def rung(self, k: int) -> np.ndarray:
        if k < 0 or k > self.k_max:
            raise ValueError(f"rung {k} outside the cached ladder 0..{self.k_max}")
        if k < len(self._rungs):
            return self._rungs[k]
        with self._lock:
            while len(self._rungs) <= k:
                if not self._rungs:
                    base = scipy.linalg.expm(-2j * np.pi * self.delta_ns * self._h)
                    self._rungs.append(base)
                else:
                    top = self._rungs[-1]
                    self._rungs.append(top @ top)
            return self._rungs[k]

    def matrix(self, duration_ns: float) -> np.ndarray:
        """Exact finite-duration propagator, memoized per duration."""
        if duration_ns < 0.0:
            raise ValueError(f"duration must be nonnegative, got {duration_ns}")
        key = float(duration_ns)
        with self._lock:
            hit = self._matrices.get(key)
        if hit is not None:
            return hit
        n = int(math.floor(duration_ns / self.delta_ns))
        residual = duration_ns - n * self.delta_ns
        out = np.eye(self._h.shape[0], dtype=complex)
        remaining = n
        while remaining > 0:
            k = min(self.k_max, remaining.bit_length() - 1)
            out = self.rung(k) @ out
            remaining -= 1 << k
        if residual > 0.0:
            out = scipy.linalg.expm(-2j * np.pi * residual * self._h) @ out
        with self._lock:
            return self._matrices.setdefault(key, out)


def precompute_propagators(
    h: np.ndarray,
    durations,
    delta_ns: float = 1e-4,
    k_max: int = 20,
) -> PropagatorCache:
    """Cache warmed with the exact matrices for the given durations."""
    cache = PropagatorCache(h, delta_ns=delta_ns, k_max=k_max)
    for duration in durations:
        cache.matrix(float(duration))
    return cache


class ProtocolSystem:
    """Shared read-only operator bundle for a family of trajectories.

    Hamiltonians are keyed by the ids segments refer to; jump operators
    attach dissipation to a subset of them.  Eigensystems and effective
    propagator ladders are built lazily, once, under a lock.
    """

    def __init__(
        self,
        grid: QuadratureGrid,
        hamiltonians: Mapping[str, np.ndarray | EigenSystem],
        jump_ops: Mapping[str, JumpOperator] | None = None,
        l_uh: float | None = None,
        c_ff: float | None = None,
        absorber: np.ndarray | None = None,
    ):
        self.grid = grid
        self._hamiltonians = dict(hamiltonians)
        self._jumps = dict(jump_ops) if jump_ops else {}
        self.l_uh = l_uh
        self.c_ff = c_ff
        self.eps_l = constants.inductive_energy(l_uh) if l_uh is not None else None
        self.absorber = absorber
        self._eigs: dict[str, EigenSystem] = {}
        self._caches: dict[tuple, PropagatorCache] = {}
        self._lock = threading.Lock()

    def check_schedule(self, schedule: Schedule, with_noise: bool) -> None:
        missing = schedule.hamiltonian_ids() - set(self._hamiltonians)
        if missing:
            raise ValueError(f"schedule needs missing Hamiltonians: {sorted(missing)}")
        if with_noise and (self.l_uh is None or self.c_ff is None):
            raise ValueError("noise coupling needs the circuit l_uh and c_ff")

    def jump_for(self, ham_id: str) -> JumpOperator | None:
        jump = self._jumps.get(ham_id)
        if jump is None or jump.is_zero:
            return None
        return jump

    def _matrix(self, ham_id: str) -> np.ndarray:
        h = self._hamiltonians[ham_id]
        if isinstance(h, EigenSystem):
            return (h.vectors * h.energies) @ h.vectors.conj().T
        return h

    def eigensystem(self, ham_id: str) -> EigenSystem:
        with self._lock:
            hit = self._eigs.get(ham_id)
        if hit is not None:
            return hit
        h = self._hamiltonians[ham_id]
        eig = h if isinstance(h, EigenSystem) else diagonalize(h)
        with self._lock:
            return self._eigs.setdefault(ham_id, eig)

    def propagator_cache(self, ham_id: str, config: SseConfig) -> PropagatorCache:
        key = (ham_id, config.delta_ns, config.k_max)
        with self._lock:
            hit = self._caches.get(key)
        if hit is not None:
            return hit
        jump = self.jump_for(ham_id)
        if jump is None:
            raise ValueError(f"no jump operator attached to '{ham_id}'")
        h_eff = effective_hamiltonian(self._matrix(ham_id), jump)
        cache = PropagatorCache(h_eff, delta_ns=config.delta_ns, k_max=config.k_max)
        with self._lock:
            return self._caches.setdefault(key, cache)


@dataclass(frozen=True)
class SegmentReadout:
    """Cheap per-segment monitors recorded at each boundary."""

    index: int
    kind: SegmentKind
    t_ns: float
    jumps: int
    edge_flux: float
    edge_charge: float


@dataclass(frozen=True)
class TrajectoryResult:
    psi: np.ndarray
    jumps: int
    readouts: tuple[SegmentReadout, ...]
    seed: object


def _edge_probabilities(grid: QuadratureGrid, psi: np.ndarray) -> tuple[float, float]:
    nrm2 = float(np.vdot(psi, psi).real)
    prob_x = np.abs(psi) ** 2 / nrm2
    psi_p = to_charge_basis(grid, psi)
    prob_p = np.abs(psi_p) ** 2 / nrm2
    return float(prob_x[0] + prob_x[-1]), float(prob_p[0] + prob_p[-1])


def _evolve_sse(psi, cache, l_matrix, steps, rng, threshold, jumps):
    """Waiting-time unraveling over an integer number of delta steps.

    psi enters with squared norm in (threshold, 1]; the returned state
    keeps the same convention so segments chain without renormalizing.
    """
    remaining = steps
    while remaining > 0:
        k = min(cache.k_max, remaining.bit_length() - 1)
        while True:
            candidate = cache.rung(k) @ psi
            norm2 = float(np.vdot(candidate, candidate).real)
            if not math.isfinite(norm2) or norm2 <= 0.0:
                raise ValueError("squared norm underflowed during a segment")
            if norm2 > threshold:
                psi = candidate
                remaining -= 1 << k
                break
            if k == 0:
                jumped = l_matrix @ candidate
                jump_norm = float(np.linalg.norm(jumped))
                if jump_norm == 0.0:
                    raise ValueError("jump operator annihilated the state")
                psi = jumped / jump_norm
                jumps += 1
                threshold = rng.random()
                remaining -= 1
                break
            k -= 1
    return psi, threshold, jumps


def run_trajectory(
    schedule: Schedule,
    system: ProtocolSystem,
    psi0: np.ndarray,
    config: SseConfig,
    noise: NoiseSignal | None = None,
) -> TrajectoryResult:
    """One stochastic run of a schedule from a pure state.

    Dissipative segments evolve under the effective Hamiltonian with
    waiting-time jumps and pick up the accumulated flux-noise phase at
    their boundary; free segments apply the exact noise displacement
    before the oscillator turn.  The edge monitors trip if probability
    reaches the grid boundary in either quadrature.

    If the system carries an absorber, it is applied at the start of
    every dissipative segment without renormalizing; weight outside the
    absorber leaves the trajectory as plain norm loss instead of being
    handed to the jump operator.
    """
    system.check_schedule(schedule, with_noise=noise is not None)
    grid = system.grid
    psi = normalize(np.asarray(psi0, dtype=complex))
    if psi.shape != (grid.d,):
        raise ValueError(f"state shape {psi.shape} does not match the grid")
    if noise is not None:
        covered = noise.times_ns[-1] - noise.times_ns[0]
        if schedule.total_ns > covered + 1e-9 or noise.times_ns[0] > 0.0:
            raise ValueError(
                f"noise window of {covered:g} ns does not cover the "
                f"{schedule.total_ns:g} ns schedule"
            )

    rng = np.random.default_rng(config.seed)
    threshold = rng.random()
    t = 0.0
    jumps = 0
    k_cap = config.k_cap
    readouts: list[SegmentReadout] = []
    for index, seg in enumerate(schedule.segments):
        jump = system.jump_for(seg.hamiltonian) if seg.dissipative else None
        if jump is not None:
            if system.absorber is not None:
                psi = system.absorber @ psi
            cache = system.propagator_cache(seg.hamiltonian, config)
            steps = cache.steps(seg.duration_ns)
            capped = _CappedCache(cache, k_cap) if k_cap < cache.k_max else cache
            psi, threshold, jumps = _evolve_sse(
                psi, capped, jump.matrix, steps, rng, threshold, jumps
            )
        else:
            eigen = system.eigensystem(seg.hamiltonian)
            if not seg.dissipative and noise is not None:
                kick = free_segment_kick(
                    noise, t, seg.duration_ns, system.l_uh, system.c_ff
                )
                psi = psi * np.exp(-1j * (kick.b * grid.x + kick.phase))
                psi = from_charge_basis(
                    grid, np.exp(-1j * kick.a * grid.p) * to_charge_basis(grid, psi)
                )
            psi = eigen.evolve(psi, seg.duration_ns)
        if seg.dissipative and noise is not None:
            alpha = integrate_alpha(noise, t, t + seg.duration_ns, system.eps_l)
            psi = psi * np.exp(-1j * alpha * grid.x)
        t += seg.duration_ns
        edge_x, edge_p = _edge_probabilities(grid, psi)
        if max(edge_x, edge_p) > config.leakage_tol:
            raise LeakageError(
                f"edge probability {max(edge_x, edge_p):.3g} after segment "
                f"{index} ({seg.kind.value}) at t = {t:.4g} ns"
            )
        readouts.append(
            SegmentReadout(
                index=index,
                kind=seg.kind,
                t_ns=t,
                jumps=jumps,
                edge_flux=edge_x,
                edge_charge=edge_p,
            )
        )
    return TrajectoryResult(
        psi=normalize(psi),
        jumps=jumps,
        readouts=tuple(readouts),
        seed=config.seed,
    )


class _CappedCache:
    """View of a PropagatorCache with a lower ladder ceiling."""

    def __init__(self, cache: PropagatorCache, k_cap: int):
        self._cache = cache
        self.k_max = k_cap

    def rung(self, k: int) -> np.ndarray:
        return self._cache.rung(k)
