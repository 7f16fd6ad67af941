"""Sweep experiments: configuration, seeding, aggregation, delimited output.

Five experiment kinds cover the protected-gate study.  A gate-time
sweep drives a pure quartic source at each requested duration; a
timing sweep jitters every segment of the calibrated schedule; a
mistargeting sweep redraws the chain fabrication values around design;
a noise sweep threads 1/f flux-noise realizations through the gate;
single_gate runs the calibrated protocol once.  A master seed fans out
into disjoint per-task streams, so outputs are bit-identical for any
thread count.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .circuit import (
    CircuitParams,
    DerivedScales,
    derived_scales,
    fit_effective_potential,
    reference_set,
)
from .dissipation import BathSpec, ule_jump_operator
from .fluxnoise import NoiseSpectrum, generate_signal
from .logical import fidelity, ideal_codeword, measure_logicals
from .protocol import (
    GateTimings,
    LeakageError,
    ProtocolSystem,
    SseConfig,
    apply_timing_jitter,
    build_stabilization_schedule,
    build_tgate_schedule,
    calibrate_timings,
    ideal_bloch_target,
    run_trajectory,
)
from .quadratures import (
    build_grid,
    diagonalize,
    hamiltonian_effective,
    hamiltonian_lcj,
    hamiltonian_quartic,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("axis", "infidelity", "stderr", "n_traj", "n_resample", "seed")

# Stream tags keep the per-task seed sequences disjoint.
_TAG_SSE = 0
_TAG_NOISE = 1
_TAG_JITTER = 2
_TAG_MISTARGET = 3
_TAG_PREP = 4


class ExperimentKind(enum.Enum):
    GATE_TIME = "gate_time_sweep"
    TIMING = "timing_sweep"
    MISTARGETING = "mistargeting_sweep"
    NOISE = "noise_sweep"
    SINGLE = "single_gate"


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: sweep kind, axis values, and the run budget.

    The circuit is a bundled set number or a JSON parameter file; the
    bath fields override whatever the file carries, and j_hghz replaces
    the main junction energy when given.  The axis meaning depends on
    the kind: target gate times in ns, jitter windows in ns, relative
    mistargeting u, or noise strengths gamma_phi in phi_0^2/THz.
    single_gate ignores the axis and runs the calibrated gate once.
    n_resample counts mistargeting draws or noise realizations and is
    ignored by the other kinds.
    """

    kind: ExperimentKind | str
    circuit: int | str = 3
    values: tuple[float, ...] = ()
    j_hghz: float | None = None
    t_mk: float = 40.0
    gamma_ghz: float = 1.5
    n_traj: int = 250
    n_resample: int = 25
    n_dd: int = 0
    cleanup_steps: int = 2
    master_seed: int = 0
    out_dir: str | None = None
    d: int = 1024
    half_range: int = 12
    n_wells: int = 10
    prep_cycles: int = 2
    leakage_tol: float = 1e-4
    delta_ns: float = 1e-4
    k_max: int = 20

    def __post_init__(self) -> None:
        kind = self.kind
        if not isinstance(kind, ExperimentKind):
            kind = ExperimentKind(str(kind))
        object.__setattr__(self, "kind", kind)
        values = tuple(float(v) for v in self.values)
        if any(not math.isfinite(v) for v in values):
            raise ValueError("sweep values must be finite")
        if list(values) != sorted(values):
            raise ValueError("sweep values must be sorted ascending")
        object.__setattr__(self, "values", values)
        if kind is not ExperimentKind.SINGLE and not values:
            raise ValueError(f"{kind.value} needs at least one sweep value")
        if kind is ExperimentKind.GATE_TIME and any(v <= 0.0 for v in values):
            raise ValueError("gate times must be positive")
        if kind is not ExperimentKind.GATE_TIME and any(v < 0.0 for v in values):
            raise ValueError("sweep values must be non-negative")
        if self.n_traj < 1:
            raise ValueError(f"need at least one trajectory, got {self.n_traj}")
        if self.n_resample < 1:
            raise ValueError(f"need at least one resample, got {self.n_resample}")
        for name in ("n_dd", "cleanup_steps", "prep_cycles"):
            count = getattr(self, name)
            if count < 0 or int(count) != count:
                raise ValueError(f"{name} must be a whole number, got {count}")
        if self.master_seed < 0 or int(self.master_seed) != self.master_seed:
            raise ValueError(f"master seed must be a non-negative integer, got {self.master_seed}")

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["kind"] = self.kind.value
        data["values"] = list(self.values)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "values" in data:
            data["values"] = tuple(data["values"])
        return cls(**data)


@dataclasses.dataclass(frozen=True)
class SweepResult:
    """Aggregated infidelity at one sweep point.

    floor is the statistical resolution 1/n_traj per resample; a point
    whose infidelity sits below it is flagged resolution_limited.
    """

    axis: float
    infidelity: float
    stderr: float
    n_traj: int
    n_resample: int
    floor: float
    resolution_limited: bool
    jumps: int
    leaked: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.infidelity <= 1.0:
            raise ValueError(f"infidelity out of range: {self.infidelity}")
        if self.stderr < 0.0 or not math.isfinite(self.stderr):
            raise ValueError(f"standard error must be non-negative, got {self.stderr}")


def load_circuit(source: CircuitParams | int | str) -> CircuitParams:
    """Bundled set number, JSON parameter file, or pass-through params."""
    if isinstance(source, CircuitParams):
        return source
    if isinstance(source, int):
        return reference_set(source)
    text = str(source)
    if text.isdigit():
        return reference_set(int(text))
    with open(text, encoding="utf-8") as handle:
        return CircuitParams.from_dict(json.load(handle))


_CHAIN_FIELDS = ("l1_uh", "l2_uh", "l3_uh", "j1p_hghz", "j2p_hghz", "j3p_hghz")


def sample_mistargeting(params: CircuitParams, u: float, seed) -> CircuitParams:
    """Fabrication draw: each chain value jitters around design by u.

    Inductances and ancilla junction energies are drawn independently
    from normals centered on the design values with standard deviation
    u times the magnitude; the total inductance and the effective
    potential follow from the drawn chain.  Non-positive inductance
    draws are rejected and redrawn.  The shunt capacitance and the main
    junction keep their design values.
    """
    drawn, _ = _sample_mistargeting_counted(params, u, seed)
    return drawn


def _sample_mistargeting_counted(
    params: CircuitParams, u: float, seed
) -> tuple[CircuitParams, int]:
    if u < 0.0 or not math.isfinite(u):
        raise ValueError(f"relative uncertainty must be non-negative, got {u}")
    if not params.has_ancilla:
        raise ValueError("mistargeting needs the three-element chain values")
    rng = np.random.default_rng(seed)
    drawn: dict[str, float] = {}
    redraws = 0
    for name in _CHAIN_FIELDS:
        nominal = getattr(params, name)
        value = rng.normal(nominal, u * abs(nominal))
        while name.startswith("l") and value <= 0.0:
            redraws += 1
            if redraws > 100:
                raise ValueError("mistargeting draws cannot reach a positive inductance")
            value = rng.normal(nominal, u * abs(nominal))
        drawn[name] = float(value)
    if redraws:
        logger.info("redrew %d non-positive inductance samples at u = %g", redraws, u)
    resampled = CircuitParams(
        j_hghz=params.j_hghz,
        c_ff=params.c_ff,
        gamma_ghz=params.gamma_ghz,
        t_mk=params.t_mk,
        cjunc_ff=params.cjunc_ff,
        **drawn,
    )
    return resampled, redraws


def aggregate(blochs, target, n_blocks: int = 25) -> tuple[float, float]:
    """Ensemble fidelity from the pooled Bloch vector, block stderr.

    Trajectory Bloch vectors are averaged before the fidelity is taken,
    matching the density-matrix average of the unraveling.  The error
    estimate re-derives the fidelity on near-equal contiguous blocks,
    so identical trajectories report exactly zero.
    """
    stack = np.asarray(blochs, dtype=float)
    if stack.ndim == 1:
        stack = stack.reshape(1, -1)
    if stack.ndim != 2 or stack.shape[1] != 3 or stack.shape[0] < 1:
        raise ValueError(f"expected an (n, 3) stack of Bloch vectors, got {stack.shape}")
    mean_f = fidelity(stack.mean(axis=0), target)
    blocks = int(max(1, min(n_blocks, stack.shape[0])))
    if blocks < 2:
        return mean_f, 0.0
    block_f = [fidelity(chunk.mean(axis=0), target) for chunk in np.array_split(stack, blocks)]
    if min(block_f) == max(block_f):
        # np.std's internal mean rounds, turning equal blocks into ~1e-17.
        return mean_f, 0.0
    return mean_f, float(np.std(block_f, ddof=1) / math.sqrt(blocks))


def _seed(config: ExperimentConfig, point: int, resample: int, traj: int, tag: int):
    return np.random.SeedSequence(
        config.master_seed, spawn_key=(point, resample, traj, tag)
    )


def _sse(config: ExperimentConfig, point: int, resample: int, traj: int, tag: int):
    return SseConfig(
        seed=_seed(config, point, resample, traj, tag),
        delta_ns=config.delta_ns,
        k_max=config.k_max,
        leakage_tol=config.leakage_tol,
    )


def _with_overrides(params: CircuitParams, config: ExperimentConfig) -> CircuitParams:
    updates = {"gamma_ghz": config.gamma_ghz, "t_mk": config.t_mk}
    if config.j_hghz is not None:
        updates["j_hghz"] = config.j_hghz
    return dataclasses.replace(params, **updates)


def _band_vectors(eig, eps_l: float, half_range: float) -> np.ndarray:
    """Stabilized eigenvectors below eps_L (X - 1)^2 over the band bottom.

    Everything above that cut touches the grid boundary ring, where the
    quadratic confinement meets the box edge and level spacings are grid
    artifacts rather than physics.
    """
    cap = eps_l * (half_range - 1.0) ** 2
    keep = eig.energies - eig.energies[0] < cap
    return eig.vectors[:, keep]


def _assemble(
    grid,
    params: CircuitParams,
    h_gate: np.ndarray,
    scales: DerivedScales,
    calibrate: bool = True,
) -> tuple[ProtocolSystem, GateTimings | None]:
    """Diagonalize the three segment Hamiltonians and attach the bath."""
    h_lcj = hamiltonian_lcj(grid, params.l_uh, params.c_ff, params.j_hghz)
    h_lc = hamiltonian_lcj(grid, params.l_uh, params.c_ff, 0.0)
    eig_lcj = diagonalize(h_lcj)
    eig_gate = diagonalize(h_gate)
    eig_lc = diagonalize(h_lc)
    bath = BathSpec(
        gamma_ghz=params.gamma_ghz,
        t_mk=params.t_mk,
        rate_reference_hghz=scales.eps0,
    )
    jumps = {
        "lcj": ule_jump_operator(h_lcj, grid, bath, eig=eig_lcj),
        "quartic": ule_jump_operator(h_gate, grid, bath, eig=eig_gate),
    }
    # Absorb off-band weight at each dissipative segment start.  The
    # state's charge envelope extends past |p| = X, and free rotations
    # alias that tail onto the flux boundary ring, where downhill rates
    # are enormous; a jump there would renormalize onto the ring and
    # cascade.  Absorption converts that unrepresentable sliver into
    # plain norm loss before the jump operator can see it.
    band = _band_vectors(eig_lcj, scales.eps_l, grid.half_range)
    system = ProtocolSystem(
        grid,
        {"lcj": eig_lcj, "quartic": eig_gate, "lc": eig_lc},
        jump_ops=jumps,
        l_uh=params.l_uh,
        c_ff=params.c_ff,
        absorber=band @ band.conj().T,
    )
    timings = None
    if calibrate:
        timings = calibrate_timings(grid, eig_lcj, eig_gate, scales.lam0, scales.f_lc)
    return system, timings


def _nominal_device(grid, params: CircuitParams):
    """Fitted-chain device: system, calibrated timings and scales."""
    pot = fit_effective_potential(params)
    scales = derived_scales(params, v4=pot.v4, v2=pot.excess.get(2, 0.0))
    h_gate = hamiltonian_effective(
        grid, params.l_uh, params.c_ff, params.j_hghz, pot.excess
    )
    system, timings = _assemble(grid, params, h_gate, scales)
    return system, timings, scales


def _confine_to_band(system: ProtocolSystem, psi: np.ndarray) -> np.ndarray:
    """Project onto the confined band of the stabilized spectrum.

    Eigenstates above eps_L (X - 1)^2 over the band bottom touch the
    grid boundary ring; the finite flux and charge envelopes of a
    constructed codeword leave a small artifact there that a thermal
    jump would amplify into boundary leakage.  Everything the protocol
    populates on purpose lies far below the cut.
    """
    eig = system.eigensystem("lcj")
    vectors = _band_vectors(eig, system.eps_l, system.grid.half_range)
    projected = vectors @ (vectors.conj().T @ psi)
    norm = np.linalg.norm(projected)
    if norm == 0.0:
        raise ValueError("state has no weight in the confined band")
    return projected / norm


def _run_ensemble(
    config: ExperimentConfig,
    system: ProtocolSystem,
    timings: GateTimings,
    point: int,
    resample: int,
    threads: int,
    codeword: tuple[float, float],
    jitter_window_ns: float = 0.0,
    noise=None,
) -> tuple[float, float, int, int]:
    """Prepare once, run n_traj gates; (fidelity, stderr, jumps, leaks).

    Preparation relaxes an ideal codeword into the device wells through
    noise-free stabilization cycles and confines it to the stabilized
    band; the measured Bloch direction seeds the ideal target so
    preparation error does not masquerade as gate error.  Jitter
    redraws the schedule per trajectory; a noise signal is shared by
    every trajectory of the resample.  A trajectory that reaches the
    grid boundary counts as an erasure: Bloch zero, fidelity one half.
    """
    grid = system.grid
    gate = build_tgate_schedule(timings, config.n_dd, config.cleanup_steps)
    prep = build_stabilization_schedule(timings, config.prep_cycles)
    lam0, kappa = codeword
    psi_seed = ideal_codeword(
        grid, np.array([1.0, 0.0, 0.0]), lam0, kappa, n_wells=config.n_wells
    )
    prep_result = run_trajectory(
        prep, system, psi_seed, _sse(config, point, resample, 0, _TAG_PREP)
    )
    psi0 = _confine_to_band(system, prep_result.psi)
    bloch0 = measure_logicals(grid, psi0).bloch
    norm0 = float(np.linalg.norm(bloch0))
    if norm0 == 0.0:
        raise ValueError("prepared state has no logical component")
    target = ideal_bloch_target(gate, bloch0 / norm0)

    def one(traj: int):
        schedule = gate
        if jitter_window_ns > 0.0:
            schedule = apply_timing_jitter(
                gate,
                jitter_window_ns,
                _seed(config, point, resample, traj, _TAG_JITTER),
                resolution_ns=config.delta_ns,
            )
        try:
            result = run_trajectory(
                schedule,
                system,
                psi0,
                _sse(config, point, resample, traj, _TAG_SSE),
                noise=noise,
            )
        except LeakageError as exc:
            logger.debug("trajectory %d erased: %s", traj, exc)
            return None, 0
        return measure_logicals(grid, result.psi).bloch, result.jumps

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(config.n_traj)))
    else:
        outcomes = [one(j) for j in range(config.n_traj)]
    blochs = np.array(
        [np.zeros(3) if bloch is None else bloch for bloch, _ in outcomes]
    )
    leaks = sum(1 for bloch, _ in outcomes if bloch is None)
    jumps = int(sum(n for _, n in outcomes))
    mean_f, stderr = aggregate(blochs, target)
    return mean_f, stderr, jumps, leaks


def _finish_point(
    config: ExperimentConfig, axis: float, stats, jumps: int, leaked: int
) -> SweepResult:
    """Combine per-resample (fidelity, stderr) pairs into one row."""
    fids = [f for f, _ in stats]
    mean_f = float(np.mean(fids))
    if len(fids) > 1:
        stderr = float(np.std(fids, ddof=1) / math.sqrt(len(fids)))
    else:
        stderr = float(stats[0][1])
    infidelity = max(0.0, 1.0 - mean_f)
    floor = 1.0 / config.n_traj
    return SweepResult(
        axis=float(axis),
        infidelity=infidelity,
        stderr=stderr,
        n_traj=config.n_traj * len(fids),
        n_resample=len(fids),
        floor=floor,
        resolution_limited=bool(infidelity < floor),
        jumps=int(jumps),
        leaked=int(leaked),
    )


def _gate_time_points(config, params, grid, threads):
    """Pure quartic source per target duration; shared LC and LCJ parts."""
    runs = []
    for point, t4_target in enumerate(config.values):

        def runner(point=point, t4_target=t4_target):
            eps4 = -1.0 / (16.0 * t4_target)
            scales = derived_scales(params, v4=eps4)
            h_gate = hamiltonian_quartic(grid, params.c_ff, params.j_hghz, eps4)
            system, timings = _assemble(grid, params, h_gate, scales)
            mean_f, stderr, jumps, leaked = _run_ensemble(
                config, system, timings, point, 0, threads,
                codeword=(scales.lam0, scales.kappa),
            )
            return _finish_point(config, t4_target, [(mean_f, stderr)], jumps, leaked)

        runs.append((t4_target, runner))
    return runs


def _timing_points(config, params, grid, threads):
    system, timings, scales = _nominal_device(grid, params)
    runs = []
    for point, window in enumerate(config.values):

        def runner(point=point, window=window):
            mean_f, stderr, jumps, leaked = _run_ensemble(
                config, system, timings, point, 0, threads,
                codeword=(scales.lam0, scales.kappa),
                jitter_window_ns=window,
            )
            return _finish_point(config, window, [(mean_f, stderr)], jumps, leaked)

        runs.append((window, runner))
    return runs


def _single_gate_points(config, params, grid, threads):
    system, timings, scales = _nominal_device(grid, params)
    axis = timings.t4_ns + timings.t2_ns

    def runner():
        mean_f, stderr, jumps, leaked = _run_ensemble(
            config, system, timings, 0, 0, threads,
            codeword=(scales.lam0, scales.kappa),
        )
        return _finish_point(config, axis, [(mean_f, stderr)], jumps, leaked)

    return [(axis, runner)]


def _mistargeting_points(config, params, grid, threads):
    """Fabricated devices under the design schedule.

    Timings stay at the design calibration; only the Hamiltonians (and
    hence the relaxed wells and phase rates) follow each drawn chain.
    Recalibrating per draw would hide exactly the error under study.
    """
    _, design_timings, design_scales = _nominal_device(grid, params)
    runs = []
    for point, u in enumerate(config.values):

        def runner(point=point, u=u):
            stats = []
            jumps = 0
            leaked = 0
            for r in range(config.n_resample):
                drawn, _ = _sample_mistargeting_counted(
                    params, u, _seed(config, point, r, 0, _TAG_MISTARGET)
                )
                pot = fit_effective_potential(drawn)
                dev_scales = derived_scales(drawn, v4=pot.v4, v2=pot.excess.get(2, 0.0))
                h_gate = hamiltonian_effective(
                    grid, drawn.l_uh, drawn.c_ff, drawn.j_hghz, pot.excess
                )
                system, _ = _assemble(grid, drawn, h_gate, dev_scales, calibrate=False)
                mean_f, stderr, nj, nl = _run_ensemble(
                    config, system, design_timings, point, r, threads,
                    codeword=(design_scales.lam0, design_scales.kappa),
                )
                stats.append((mean_f, stderr))
                jumps += nj
                leaked += nl
            return _finish_point(config, u, stats, jumps, leaked)

        runs.append((u, runner))
    return runs


def _noise_points(config, params, grid, threads):
    system, timings, scales = _nominal_device(grid, params)
    runs = []
    for point, gamma_phi in enumerate(config.values):

        def runner(point=point, gamma_phi=gamma_phi):
            stats = []
            jumps = 0
            leaked = 0
            resamples = config.n_resample if gamma_phi > 0.0 else 1
            for r in range(resamples):
                noise = None
                if gamma_phi > 0.0:
                    noise = generate_signal(
                        NoiseSpectrum(gamma_phi),
                        _seed(config, point, r, 0, _TAG_NOISE),
                    )
                mean_f, stderr, nj, nl = _run_ensemble(
                    config, system, timings, point, r, threads,
                    codeword=(scales.lam0, scales.kappa),
                    noise=noise,
                )
                stats.append((mean_f, stderr))
                jumps += nj
                leaked += nl
            return _finish_point(config, gamma_phi, stats, jumps, leaked)

        runs.append((gamma_phi, runner))
    return runs


_KIND_POINTS = {
    ExperimentKind.GATE_TIME: _gate_time_points,
    ExperimentKind.TIMING: _timing_points,
    ExperimentKind.MISTARGETING: _mistargeting_points,
    ExperimentKind.NOISE: _noise_points,
    ExperimentKind.SINGLE: _single_gate_points,
}


def run_experiment(config: ExperimentConfig, threads: int = 1) -> tuple[SweepResult, ...]:
    """Execute one experiment; write CSV and JSON when out_dir is set.

    Returns per-point results in axis order.  A failing point is
    logged, recorded in the JSON sidecar, and skipped in the CSV; the
    sweep continues with the remaining points.
    """
    if threads < 1:
        raise ValueError(f"thread count must be at least 1, got {threads}")
    params = _with_overrides(load_circuit(config.circuit), config)
    grid = build_grid(config.d, config.half_range)
    point_runs = _KIND_POINTS[config.kind](config, params, grid, threads)

    results: list[SweepResult] = []
    errors: list[dict] = []
    for axis, runner in point_runs:
        try:
            results.append(runner())
        except Exception as exc:  # a bad point must not kill the sweep
            logger.warning("sweep point %g failed: %s", axis, exc)
            errors.append({"axis": float(axis), "error": f"{type(exc).__name__}: {exc}"})
    if config.out_dir is not None:
        write_outputs(config, results, errors, config.out_dir)
    return tuple(results)


def write_outputs(
    config: ExperimentConfig,
    results,
    errors,
    out_dir: str | Path,
) -> tuple[Path, Path]:
    """Delimited rows plus a JSON sidecar with the full configuration."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [",".join(CSV_COLUMNS)]
    for res in results:
        rows.append(
            "%.17g,%.17g,%.17g,%d,%d,%d"
            % (
                res.axis,
                res.infidelity,
                res.stderr,
                res.n_traj,
                res.n_resample,
                config.master_seed,
            )
        )
    stem = config.kind.value
    csv_path = out / f"{stem}.csv"
    csv_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    provenance = config.to_dict()
    # The sidecar sits inside the output directory; recording the path
    # would make otherwise-identical runs differ byte for byte.
    provenance.pop("out_dir")
    sidecar = {
        "config": provenance,
        "results": [dataclasses.asdict(res) for res in results],
        "errors": list(errors),
    }
    json_path = out / f"{stem}.json"
    json_path.write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return csv_path, json_path
