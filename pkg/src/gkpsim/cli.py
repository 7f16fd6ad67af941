"""Command line front end for device analysis, search, and sweeps.

Every subcommand reads a JSON config file and writes delimited output
next to a JSON sidecar when an output directory is given.  Seeds fix
every random stream, so rerunning a command with the same config and
seed reproduces its output files byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import pathlib
import sys

import numpy as np
import scipy.integrate
import scipy.signal

from .circuit import (
    derived_scales,
    envelope_ft_series,
    fit_effective_potential,
    normal_mode_frequencies,
)
from .fluxnoise import (
    NoiseGrid,
    NoiseKernel,
    NoiseSpectrum,
    default_eval_times_ns,
    generate_dense_signal,
)
from .harness import ExperimentConfig, load_circuit, run_experiment
from .search import FitOptions, SearchSpace, search_parameters, validate_parameter_set

# First-order series; the Gaussian-weighted Hermite sup grows too fast
# with order for the asymptotic guard at these alpha_k kappa**k values.
_ENVELOPE_DEFAULTS = {
    "k": 6,
    "kappa": 10.0 / math.pi,
    "alphas": (0.0, 1e-5, 3e-5, 1e-4),
    "q_max": 1.5,
    "n_q": 301,
    "m_max": 1,
}


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"config root must be a JSON object, got {type(data).__name__}")
    return data


def _resolve_threads(arg: int | None) -> int:
    if arg is not None:
        value = arg
    else:
        env = os.environ.get("GKPSIM_THREADS")
        if env is None:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"GKPSIM_THREADS must be an integer, got {env!r}") from None
    if value < 1:
        raise ValueError(f"thread count must be at least 1, got {value}")
    return value


def _out_dir(args) -> pathlib.Path | None:
    if args.out is None:
        return None
    path = pathlib.Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: pathlib.Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("%.17g" % v for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: pathlib.Path, payload) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n",
        encoding="utf-8",
    )


def _json_default(obj):
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _circuit_with_overrides(config: dict):
    params = load_circuit(config["circuit"])
    overrides = {
        key: float(config[key])
        for key in ("j_hghz", "t_mk", "gamma_ghz", "cjunc_ff")
        if config.get(key) is not None
    }
    if overrides:
        params = dataclasses.replace(params, **overrides)
    return params


def _cmd_potential(args) -> int:
    config = _load_json(args.config)
    params = _circuit_with_overrides(config)
    fit_keys = ("phi_max", "n_samples", "k_max", "residual_tol", "threshold")
    fit = {k: config[k] for k in fit_keys if k in config}
    options = FitOptions(**fit) if fit else None
    report = validate_parameter_set(params, options=options)

    scales = report.scales
    print(f"V4 = {report.coefficients[4]:.6e} h GHz (residual fit over even orders)")
    print(
        f"lam0 = {scales.lam0:.6f}  eps0 = {scales.eps0:.4f} h GHz  "
        f"kappa = {scales.kappa:.4f}  f_lc = {scales.f_lc:.6f} GHz"
    )
    print(
        f"t4 = {scales.t4:.3f} ns  t2 = {scales.t2:.4f} ns  "
        f"t_gate = {scales.t_gate * 1e-3:.4f} us"
    )
    print(
        "constraints: eigenstate %s, dephasing %s"
        % (
            "pass" if report.eigenstate.passed else "FAIL",
            "pass" if report.dephasing.passed else "FAIL",
        )
    )

    out = _out_dir(args)
    if out is not None:
        coeff_rows = [(k, v) for k, v in sorted(report.coefficients.items())]
        _write_csv(out / "potential.csv", ["order", "coefficient_hghz"], coeff_rows)
        env = dict(_ENVELOPE_DEFAULTS)
        env.update(config.get("envelope", {}))
        q = np.linspace(0.0, float(env["q_max"]), int(env["n_q"]))
        header = ["q"]
        columns = [q]
        for alpha in env["alphas"]:
            values = envelope_ft_series(
                float(env["kappa"]), int(env["k"]), float(alpha), q, int(env["m_max"])
            )
            header.append(f"abs_f_alpha_{alpha:g}")
            columns.append(np.abs(values))
        _write_csv(out / "envelope_ft.csv", header, np.column_stack(columns))
        _write_json(
            out / "potential.json",
            {
                "params": dataclasses.asdict(report.params),
                "coefficients": {str(k): v for k, v in report.coefficients.items()},
                "scales": dataclasses.asdict(scales),
                "eigenstate": dataclasses.asdict(report.eigenstate),
                "dephasing": dataclasses.asdict(report.dephasing),
                "score": report.score,
                "passed": report.passed,
            },
        )
        print(f"wrote {out / 'potential.csv'}, envelope_ft.csv, potential.json")
    return 0


def _cmd_modes(args) -> int:
    config = _load_json(args.config)
    params = _circuit_with_overrides(config)
    lo = float(config.get("cjunc_min_ff", 0.01))
    hi = float(config.get("cjunc_max_ff", 1.0))
    n = int(config.get("n_points", 25))
    n_well = int(config.get("n_well", 0))
    if not (0.0 < lo < hi):
        raise ValueError(f"need 0 < cjunc_min_ff < cjunc_max_ff, got {lo}, {hi}")
    sweep = np.geomspace(lo, hi, n)

    rows = []
    for cjunc in sweep:
        modes = normal_mode_frequencies(
            dataclasses.replace(params, cjunc_ff=float(cjunc)), n_well=n_well
        )
        f_thz = modes.frequencies_ghz * 1e-3
        rows.append((cjunc, *f_thz, *modes.temperatures_k))

    ref = min(rows, key=lambda row: abs(row[0] - 0.1))
    print(
        f"at C_junc = {ref[0]:.3f} fF: f = ({ref[1]:.4f}, {ref[2]:.4f}, {ref[3]:.4f}) THz, "
        f"T_eq = ({ref[4]:.2f}, {ref[5]:.2f}, {ref[6]:.2f}) K"
    )
    print(f"mode ratios at that point: {ref[2] / ref[1]:.2f}x, {ref[3] / ref[1]:.2f}x")

    out = _out_dir(args)
    if out is not None:
        _write_csv(
            out / "modes.csv",
            ["cjunc_ff", "f1_thz", "f2_thz", "f3_thz", "t1_k", "t2_k", "t3_k"],
            rows,
        )
        print(f"wrote {out / 'modes.csv'}")
    return 0


def _cmd_search(args) -> int:
    config = _load_json(args.config)
    fit = config.pop("fit", None)
    options = FitOptions(**fit) if fit else None
    space = SearchSpace.from_dict(config)
    threads = _resolve_threads(args.threads)
    report = search_parameters(space, options=options, seed=args.seed, threads=threads)

    if report.results:
        best = report.results[0]
        print(
            f"{len(report.results)} feasible sets; best score {best.score:.4f}, "
            f"t_gate = {best.t_gate_us:.2f} us"
        )
    else:
        print("no feasible parameter sets found")
    print(f"diagnostics: {report.diagnostics}")

    out = _out_dir(args)
    if out is not None:
        rows = [
            (
                r.score,
                r.t_gate_us,
                r.v4,
                r.params.l1_uh,
                r.params.l2_uh,
                r.params.l3_uh,
                r.params.j1p_hghz,
                r.params.j2p_hghz,
                r.params.j3p_hghz,
            )
            for r in report.results
        ]
        _write_csv(
            out / "search.csv",
            [
                "score",
                "t_gate_us",
                "v4_hghz",
                "l1_uh",
                "l2_uh",
                "l3_uh",
                "j1p_hghz",
                "j2p_hghz",
                "j3p_hghz",
            ],
            rows,
        )
        _write_json(
            out / "search.json",
            {
                "seed": args.seed,
                "diagnostics": report.diagnostics,
                "results": [dataclasses.asdict(r) for r in report.results],
            },
        )
        print(f"wrote {out / 'search.csv'}, search.json")
    return 0


def _structure_reference(spectrum: NoiseSpectrum, lags_s: np.ndarray) -> np.ndarray:
    """Increment variance D(tau) = C(0) - C(tau) of the stationary process.

    D(tau) = gamma 1e-12/pi int_0^inf j(w) (1 - cos w tau) dw for the
    two-sided rad/s density.  The infrared divergence cancels in the
    increment, so this reference is insensitive to the finite generation
    window that truncates C(0) itself.
    """
    prefactor = spectrum.gamma_phi * 1e-12 / np.pi
    mid, _ = scipy.integrate.quad(spectrum.j_tilde, 1.0, np.inf, limit=400)
    out = np.empty_like(lags_s)
    for i, tau in enumerate(lags_s):
        head, _ = scipy.integrate.quad(
            lambda w: spectrum.j_tilde(w) * (1.0 - np.cos(w * tau)),
            0.0,
            1.0,
            limit=400,
        )
        tail, _ = scipy.integrate.quad(
            spectrum.j_tilde,
            1.0,
            np.inf,
            weight="cos",
            wvar=tau,
            limit=2000,
        )
        out[i] = prefactor * (head + mid - tail)
    return out


def _cmd_noise_check(args) -> int:
    config = _load_json(args.config) if args.config else {}
    gamma_phi = float(config.get("gamma_phi", 1.0))
    n_seeds = int(config.get("n_seeds", 1000))
    n_psd = int(config.get("n_psd", 200))
    variance_tol = float(config.get("variance_tol", 0.15))
    autocorr_tol = float(config.get("autocorr_tol", 0.10))
    psd_tol = float(config.get("psd_tol", 0.10))
    window_s = float(config.get("psd_window_s", 0.25))
    dt_s = float(config.get("psd_dt_s", 2e-6))
    spectrum = NoiseSpectrum(gamma_phi)

    # Ensemble check on the kernel samples.  The marginal variance is
    # compared against the generator's own windowed target; the lag
    # structure is compared through the increment variance D(tau), which
    # the finite window cannot distort.  t = 0 is excluded since the
    # window start only sees half the kernel mass.
    grid = NoiseGrid.build(spectrum)
    times_ns = default_eval_times_ns()
    steps = np.diff(times_ns)
    if not np.allclose(steps, steps[0]):
        raise ValueError("evaluation grid must be uniform for pair averaging")
    kernel = NoiseKernel(spectrum, grid, times_ns)
    lag_steps = np.array([1, 2, 4, 8, 16])
    acc_var = 0.0
    acc_d = np.zeros(len(lag_steps))
    for i in range(n_seeds):
        interior = kernel.sample((args.seed, i)).values[1:]
        acc_var += (interior**2).mean()
        for k, ell in enumerate(lag_steps):
            acc_d[k] += 0.5 * ((interior[ell:] - interior[:-ell]) ** 2).mean()
    var_ratio = float(acc_var / n_seeds / spectrum.variance_target())
    lags_s = lag_steps * steps[0] * 1e-9
    d_sample = acc_d / n_seeds
    d_ref = _structure_reference(spectrum, lags_s)
    auto_err = float(np.max(np.abs(d_sample / d_ref - 1.0)))
    auto_pass = abs(var_ratio - 1.0) < variance_tol and auto_err < autocorr_tol

    # Band-averaged periodogram of dense signals against the one-sided
    # target S(f) = 2 gamma 1e-12 j(2 pi f) over [10 Hz, Lambda/10].
    psd_acc = None
    for i in range(n_psd):
        _, values = generate_dense_signal(spectrum, (args.seed, 7919, i), window_s, dt_s)
        freqs, psd = scipy.signal.welch(
            values,
            fs=1.0 / dt_s,
            window="hann",
            nperseg=len(values),
            detrend="constant",
        )
        psd_acc = psd if psd_acc is None else psd_acc + psd
    psd_mean = psd_acc / n_psd
    target = 2.0 * gamma_phi * 1e-12 * spectrum.j_tilde(2.0 * np.pi * freqs)
    f_hi = spectrum.omega_uv / 10.0 / (2.0 * np.pi)
    # The first band is widened so it holds several resolution bins.
    edges = np.concatenate([[10.0, 30.0], np.geomspace(30.0, f_hi, 12)[1:]])
    band_rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (freqs >= lo) & (freqs < hi)
        if not sel.any():
            continue
        ratio = psd_mean[sel].mean() / target[sel].mean()
        band_rows.append((math.sqrt(lo * hi), float(ratio), int(sel.sum())))
    psd_err = float(max(abs(r - 1.0) for _, r, _ in band_rows))
    psd_pass = psd_err < psd_tol

    print(
        f"variance ratio {var_ratio:.4f} (tol {variance_tol}); "
        f"increment max err {auto_err:.4f} (tol {autocorr_tol}): "
        f"{'pass' if auto_pass else 'FAIL'}"
    )
    print(
        f"psd band max err {psd_err:.4f} over {len(band_rows)} bands "
        f"(tol {psd_tol}): {'pass' if psd_pass else 'FAIL'}"
    )

    out = _out_dir(args)
    if out is not None:
        variance = acc_var / n_seeds
        auto_rows = [(0.0, variance, spectrum.variance_target())]
        for tau, ds, dr in zip(lags_s, d_sample, d_ref):
            auto_rows.append((tau, variance - ds, spectrum.variance_target() - dr))
        _write_csv(out / "noise_autocorr.csv", ["lag_s", "sample", "reference"], auto_rows)
        in_band = np.flatnonzero((freqs >= 10.0) & (freqs < f_hi))
        keep = in_band[np.unique(np.geomspace(1, len(in_band), 120).astype(int)) - 1]
        _write_csv(
            out / "noise_psd.csv",
            ["freq_hz", "sample", "target"],
            np.column_stack([freqs[keep], psd_mean[keep], target[keep]]),
        )
        _write_json(
            out / "noise_check.json",
            {
                "gamma_phi": gamma_phi,
                "n_seeds": n_seeds,
                "n_psd": n_psd,
                "variance_ratio": var_ratio,
                "increment_max_err": auto_err,
                "psd_band_max_err": psd_err,
                "psd_bands": [
                    {"freq_hz": f, "ratio": r, "bins": n} for f, r, n in band_rows
                ],
                "variance_tol": variance_tol,
                "autocorr_tol": autocorr_tol,
                "psd_tol": psd_tol,
                "passed": bool(auto_pass and psd_pass),
            },
        )
        print(f"wrote {out / 'noise_autocorr.csv'}, noise_psd.csv, noise_check.json")
    return 0 if (auto_pass and psd_pass) else 1


def _run_harness(args, config_dict: dict) -> int:
    if args.seed is not None:
        config_dict["master_seed"] = args.seed
    if args.out is not None:
        config_dict["out_dir"] = args.out
    config = ExperimentConfig.from_dict(config_dict)
    threads = _resolve_threads(args.threads)
    results = run_experiment(config, threads=threads)
    for row in results:
        flag = " (resolution limited)" if row.resolution_limited else ""
        print(
            f"axis = {row.axis:g}  infidelity = {row.infidelity:.6e} "
            f"+- {row.stderr:.2e}  n_traj = {row.n_traj}  jumps = {row.jumps}  "
            f"leaked = {row.leaked}{flag}"
        )
    if not results:
        print("no sweep points produced results; see the JSON sidecar for errors")
    if config.out_dir is not None:
        kind = config.kind.value
        print(f"wrote {pathlib.Path(config.out_dir) / kind}.csv and .json")
    return 0


def _cmd_gate(args) -> int:
    config = _load_json(args.config)
    kind = config.setdefault("kind", "single_gate")
    if kind != "single_gate":
        raise ValueError(f"gate runs kind single_gate; use sweep for {kind!r}")
    config.setdefault("values", [])
    return _run_harness(args, config)


def _cmd_sweep(args) -> int:
    return _run_harness(args, _load_json(args.config))


_COMMANDS = {
    "potential": _cmd_potential,
    "modes": _cmd_modes,
    "search": _cmd_search,
    "noise-check": _cmd_noise_check,
    "gate": _cmd_gate,
    "sweep": _cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gkpsim",
        description="Stabilized GKP qubit: device analysis and gate sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "potential": "fit the effective potential and derived scales",
        "modes": "sweep junction capacitance over the circuit normal modes",
        "search": "search the ancilla chain space for feasible devices",
        "noise-check": "validate generated flux noise statistics",
        "gate": "run a single-gate experiment",
        "sweep": "run a sweep experiment from a full config",
    }
    for name, help_text in specs.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument(
            "--config",
            required=name != "noise-check",
            help="JSON config file",
        )
        cmd.add_argument("--seed", type=int, default=None, help="master seed override")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker threads (default: GKPSIM_THREADS or 1)",
        )
        cmd.add_argument(
            "--verbose", action="store_true", help="log progress and redraws"
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.seed is not None and args.seed < 0:
        print("error: seed must be nonnegative", file=sys.stderr)
        return 2
    if args.command in ("search", "noise-check") and args.seed is None:
        args.seed = 0
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
