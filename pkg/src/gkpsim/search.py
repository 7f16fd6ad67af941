"""Parameter search over the ancilla chain maximizing the quartic term.

The five free knobs are L2, L3 and the three junction energies; L1 takes
up the remainder of a fixed total inductance so the oscillator scales
stay put while the chain reshapes the potential. The score is |V4|
damped by smooth penalties on the perturbative constraint margins, so
the optimizer is pulled back toward the feasible region instead of
hitting a wall.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from .circuit import (
    AmbiguousMinimumError,
    CircuitParams,
    ConstraintMargins,
    DerivedScales,
    EffectivePotential,
    MinimizationError,
    REFERENCE_GATE_TIMES_US,
    constraint_dephasing,
    constraint_eigenstate,
    derived_scales,
    fit_effective_potential,
    reference_set,
)

_FREE_NAMES = ("l2_uh", "l3_uh", "j1p_hghz", "j2p_hghz", "j3p_hghz")
_BOUND_KEYS = {
    "l2_uh": "L2_uH",
    "l3_uh": "L3_uH",
    "j1p_hghz": "J1p_hGHz",
    "j2p_hghz": "J2p_hGHz",
    "j3p_hghz": "J3p_hGHz",
}


@dataclass(frozen=True)
class FitOptions:
    """Shared configuration for potential fits and constraint checks."""

    phi_max: float = 6.0
    n_samples: int = 241
    k_max: int = 8
    residual_tol: float = 1e-4
    threshold: float = 0.1
    alpha: float = 2.0
    zeta: float = 1.0


@dataclass(frozen=True)
class SearchSpace:
    """Box constraints for the free chain parameters.

    Junction bounds may span zero or be entirely negative; inductor
    bounds must stay positive and leave room for L1 under the total.
    """

    l_total_uh: float
    l2_uh: tuple[float, float]
    l3_uh: tuple[float, float]
    j1p_hghz: tuple[float, float]
    j2p_hghz: tuple[float, float]
    j3p_hghz: tuple[float, float]
    seed_count: int = 8
    xatol: float = 1e-5
    fatol: float = 1e-12
    max_iterations: int = 400
    j_hghz: float = 150.0
    gamma_ghz: float = 1.5
    t_mk: float = 40.0
    cjunc_ff: float = 0.1

    def __post_init__(self) -> None:
        if not math.isfinite(self.l_total_uh) or self.l_total_uh <= 0.0:
            raise ValueError("total inductance must be positive and finite")
        for name in _FREE_NAMES:
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"{name} bounds must be finite")
            if lo > hi:
                raise ValueError(f"{name} bounds are reversed")
            if name.startswith("l") and lo <= 0.0:
                raise ValueError(f"{name} lower bound must be positive")
        if self.l2_uh[0] + self.l3_uh[0] >= self.l_total_uh:
            raise ValueError("inductor bounds leave no room for L1")
        if self.seed_count < 1:
            raise ValueError("seed_count must be at least 1")

    @property
    def lower(self) -> np.ndarray:
        return np.array([getattr(self, n)[0] for n in _FREE_NAMES])

    @property
    def upper(self) -> np.ndarray:
        return np.array([getattr(self, n)[1] for n in _FREE_NAMES])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def params_at(self, vector: np.ndarray) -> CircuitParams:
        l2, l3, j1, j2, j3 = (float(v) for v in vector)
        l1 = self.l_total_uh - l2 - l3
        if l1 <= 0.0:
            raise ValueError("vector leaves no inductance for L1")
        return CircuitParams(
            l1_uh=l1,
            l2_uh=l2,
            l3_uh=l3,
            j1p_hghz=j1,
            j2p_hghz=j2,
            j3p_hghz=j3,
            j_hghz=self.j_hghz,
            gamma_ghz=self.gamma_ghz,
            t_mk=self.t_mk,
            cjunc_ff=self.cjunc_ff,
        )

    @classmethod
    def around(cls, params: CircuitParams, rel: float, **kwargs) -> "SearchSpace":
        """Symmetric relative box centred on an existing parameter set."""
        if rel < 0.0:
            raise ValueError("relative width must be nonnegative")
        bounds = {}
        for name in _FREE_NAMES:
            v = getattr(params, name)
            lo, hi = v * (1.0 - rel), v * (1.0 + rel)
            bounds[name] = (min(lo, hi), max(lo, hi))
        return cls(
            l_total_uh=params.l_uh,
            j_hghz=params.j_hghz,
            gamma_ghz=params.gamma_ghz,
            t_mk=params.t_mk,
            cjunc_ff=params.cjunc_ff,
            **bounds,
            **kwargs,
        )

    def to_dict(self) -> dict:
        d = {"L_uH": self.l_total_uh}
        for name, key in _BOUND_KEYS.items():
            d[key] = list(getattr(self, name))
        d.update(
            seed_count=self.seed_count,
            xatol=self.xatol,
            fatol=self.fatol,
            max_iterations=self.max_iterations,
            J_hGHz=self.j_hghz,
            Gamma_GHz=self.gamma_ghz,
            T_mK=self.t_mk,
            Cjunc_fF=self.cjunc_ff,
        )
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SearchSpace":
        data = dict(data)
        kwargs = {"l_total_uh": data.pop("L_uH")}
        for name, key in _BOUND_KEYS.items():
            lo, hi = data.pop(key)
            kwargs[name] = (float(lo), float(hi))
        renames = {
            "J_hGHz": "j_hghz",
            "Gamma_GHz": "gamma_ghz",
            "T_mK": "t_mk",
            "Cjunc_fF": "cjunc_ff",
        }
        for key, value in data.items():
            kwargs[renames.get(key, key)] = value
        return cls(**kwargs)


@dataclass(frozen=True)
class SearchResult:
    params: CircuitParams
    coefficients: dict[int, float]
    eigenstate: ConstraintMargins
    dephasing: ConstraintMargins
    scales: DerivedScales
    score: float
    feasible: bool

    @property
    def v4(self) -> float:
        return self.coefficients[4]

    @property
    def t_gate_us(self) -> float:
        return self.scales.t_gate * 1e-3

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "coefficients": {str(k): v for k, v in self.coefficients.items()},
            "eigenstate_ratios": {str(k): v for k, v in self.eigenstate.ratios.items()},
            "dephasing_ratios": {str(k): v for k, v in self.dephasing.ratios.items()},
            "t_gate_us": self.t_gate_us,
            "score": self.score,
            "feasible": self.feasible,
        }


@dataclass(frozen=True)
class SearchReport:
    results: tuple[SearchResult, ...]
    diagnostics: dict


@dataclass(frozen=True)
class ValidationReport:
    params: CircuitParams
    coefficients: dict[int, float]
    eigenstate: ConstraintMargins
    dephasing: ConstraintMargins
    scales: DerivedScales
    score: float
    passed: bool
    reference_t_gate_us: float | None

    @property
    def t_gate_us(self) -> float:
        return self.scales.t_gate * 1e-3

    @property
    def t_gate_ratio(self) -> float | None:
        if self.reference_t_gate_us is None:
            return None
        return self.t_gate_us / self.reference_t_gate_us


def _penalty(ratio: float, threshold: float) -> float:
    # Softplus wall: ~1 deep inside the margin, 1/2 at the threshold,
    # exponentially crushed beyond it.
    width = 0.1 * threshold
    return math.exp(-np.logaddexp(0.0, (ratio - threshold) / width))


def _assess(
    params: CircuitParams, options: FitOptions
) -> tuple[EffectivePotential, DerivedScales, ConstraintMargins, ConstraintMargins, float]:
    fit = fit_effective_potential(
        params,
        phi_max=options.phi_max,
        n_samples=options.n_samples,
        k_max=options.k_max,
        residual_tol=options.residual_tol,
    )
    if fit.v4 == 0.0:
        raise ValueError("quartic coefficient vanished")
    excess = fit.excess
    scales = derived_scales(params, v4=fit.v4, v2=excess.get(2, 0.0))
    eig_terms = {k: v for k, v in excess.items() if k >= 4}
    deph_terms = {k: v for k, v in excess.items() if k not in (0, 2, 4)}
    eig = constraint_eigenstate(
        eig_terms,
        scales,
        alpha=options.alpha,
        zeta=options.zeta,
        threshold=options.threshold,
    )
    deph = constraint_dephasing(
        deph_terms, scales.kappa, scales.t4, threshold=options.threshold
    )
    score = abs(fit.v4)
    for r in (*eig.ratios.values(), *deph.ratios.values()):
        score *= _penalty(r, options.threshold)
    return fit, scales, eig, deph, score


def validate_parameter_set(
    params: CircuitParams, options: FitOptions | None = None
) -> ValidationReport:
    """Fit, check constraints and compare against the bundled sets."""
    options = options or FitOptions()
    fit, scales, eig, deph, score = _assess(params, options)
    reference = None
    for n, t_us in REFERENCE_GATE_TIMES_US.items():
        if _matches(params, reference_set(n)):
            reference = t_us
            break
    return ValidationReport(
        params=params,
        coefficients=fit.coefficients,
        eigenstate=eig,
        dephasing=deph,
        scales=scales,
        score=score,
        passed=eig.passed and deph.passed,
        reference_t_gate_us=reference,
    )


def _matches(a: CircuitParams, b: CircuitParams) -> bool:
    fields = (
        "l1_uh", "l2_uh", "l3_uh", "j1p_hghz", "j2p_hghz", "j3p_hghz",
        "j_hghz", "gamma_ghz", "t_mk",
    )
    return all(
        math.isclose(getattr(a, f), getattr(b, f), rel_tol=1e-9, abs_tol=1e-12)
        for f in fields
    )


@dataclass
class _StartOutcome:
    result: SearchResult | None = None
    evaluations: int = 0
    failures: Counter = field(default_factory=Counter)


def _optimize_start(space: SearchSpace, options: FitOptions, x0: np.ndarray) -> _StartOutcome:
    lower, upper = space.lower, space.upper
    outcome = _StartOutcome()
    best: list = [np.inf, None]  # (-score, SearchResult)

    def objective(z: np.ndarray) -> float:
        outcome.evaluations += 1
        z = np.clip(z, lower, upper)
        try:
            params = space.params_at(z)
            fit, scales, eig, deph, score = _assess(params, options)
        except (MinimizationError, AmbiguousMinimumError, ValueError) as exc:
            outcome.failures[type(exc).__name__] += 1
            return 0.0
        if -score < best[0]:
            best[0] = -score
            best[1] = SearchResult(
                params=params,
                coefficients=fit.coefficients,
                eigenstate=eig,
                dephasing=deph,
                scales=scales,
                score=score,
                feasible=eig.passed and deph.passed,
            )
        return -score

    if np.all(upper == lower):
        objective(space.center)
    else:
        scipy.optimize.minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={
                "xatol": space.xatol,
                "fatol": space.fatol,
                "maxiter": space.max_iterations,
            },
        )
    outcome.result = best[1]
    return outcome


def search_parameters(
    space: SearchSpace,
    options: FitOptions | None = None,
    seed: int = 0,
    threads: int = 1,
) -> SearchReport:
    """Multi-start Nelder-Mead maximization of the penalized |V4|.

    The first start sits at the box centre; the rest are drawn uniformly
    from the box. Results are deduplicated, ranked by score and restricted
    to sets that pass both constraint checks; near misses are summarized
    in the diagnostics.
    """
    options = options or FitOptions()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    starts = [space.center]
    for _ in range(space.seed_count - 1):
        starts.append(rng.uniform(space.lower, space.upper))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(
                pool.map(lambda x0: _optimize_start(space, options, x0), starts)
            )
    else:
        outcomes = [_optimize_start(space, options, x0) for x0 in starts]

    candidates = [o.result for o in outcomes if o.result is not None]
    candidates.sort(key=_rank_key)
    unique: list[SearchResult] = []
    for cand in candidates:
        if not any(_same_point(cand, kept) for kept in unique):
            unique.append(cand)
    results = tuple(r for r in unique if r.feasible)
    infeasible = [r for r in unique if not r.feasible]

    failures: Counter = Counter()
    for o in outcomes:
        failures.update(o.failures)
    diagnostics = {
        "n_starts": len(starts),
        "n_evaluations": sum(o.evaluations for o in outcomes),
        "n_results": len(results),
        "n_infeasible": len(infeasible),
        "best_infeasible_score": infeasible[0].score if infeasible else None,
        "failure_counts": dict(failures),
    }
    return SearchReport(results=results, diagnostics=diagnostics)


def _rank_key(result: SearchResult):
    p = result.params
    return (
        -result.score,
        p.l2_uh, p.l3_uh, p.j1p_hghz, p.j2p_hghz, p.j3p_hghz,
    )


def _same_point(a: SearchResult, b: SearchResult) -> bool:
    for name in _FREE_NAMES:
        va, vb = getattr(a.params, name), getattr(b.params, name)
        if abs(va - vb) > 1e-4 * max(1.0, abs(va), abs(vb)):
            return False
    return True
