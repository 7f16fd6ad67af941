"""Render figure panels from the delimited files the simulator writes.

This layer reads CSV tables and draws them; nothing physical is
recomputed here.  Sweep panels (a-d) show infidelity with error bars
against the sweep axis, panel s1 shows the chain normal modes with a
dual frequency/temperature axis, and panel s2 shows envelope transform
magnitudes, one curve per table column.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import pathlib
import sys

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

GATE_INFIDELITY_REFERENCE = 1e-3

_SWEEP_AXES = {
    "a": ("quartic segment duration (ns)", "log"),
    "b": ("timing jitter window (ns)", "linear"),
    "c": ("relative mistargeting", "log"),
    "d": ("flux noise strength (phi0^2/THz)", "linear"),
}

_MODE_COLUMNS = ("cjunc_ff", "f1_thz", "f2_thz", "f3_thz", "t1_k", "t2_k", "t3_k")


class SchemaError(ValueError):
    """An input table is missing a required column or is malformed."""


@dataclasses.dataclass(frozen=True)
class PanelSpec:
    """Inputs, axis styling, reference lines, and output path of a panel."""

    panel: str
    inputs: tuple[pathlib.Path, ...]
    out_path: pathlib.Path
    x_label: str
    y_label: str
    x_scale: str = "linear"
    y_scale: str = "linear"
    reference_lines: tuple[float, ...] = ()


def build_spec(panel: str, inputs, out_path) -> PanelSpec:
    """Fixed layout for one of the panels a-d, s1, s2."""
    paths = tuple(pathlib.Path(p) for p in inputs)
    out = pathlib.Path(out_path)
    if panel in _SWEEP_AXES:
        x_label, x_scale = _SWEEP_AXES[panel]
        return PanelSpec(
            panel=panel,
            inputs=paths,
            out_path=out,
            x_label=x_label,
            y_label="gate infidelity",
            x_scale=x_scale,
            y_scale="log",
            reference_lines=(GATE_INFIDELITY_REFERENCE,),
        )
    if panel in ("s1", "s2"):
        if len(paths) != 1:
            raise ValueError(
                f"panel {panel} takes exactly one input table, got {len(paths)}"
            )
        if panel == "s1":
            return PanelSpec(
                panel=panel,
                inputs=paths,
                out_path=out,
                x_label="junction capacitance (fF)",
                y_label="mode frequency (THz)",
                x_scale="log",
                y_scale="log",
            )
        return PanelSpec(
            panel=panel,
            inputs=paths,
            out_path=out,
            x_label="charge displacement q",
            y_label="envelope transform magnitude",
            y_scale="log",
        )
    raise ValueError(f"unknown panel {panel!r}; expected a, b, c, d, s1 or s2")


def _read_table(path: pathlib.Path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise SchemaError(f"{path}: empty file, expected a header row")
    header, body = rows[0], rows[1:]
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise SchemaError(
                f"{path}: row {i + 2} has {len(row)} fields, header has {len(header)}"
            )
    try:
        values = np.array([[float(cell) for cell in row] for row in body])
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric cell: {exc}") from None
    if not body:
        values = np.empty((0, len(header)))
    return {name: values[:, i] for i, name in enumerate(header)}


def _require(table: dict, path: pathlib.Path, names) -> None:
    missing = [name for name in names if name not in table]
    if missing:
        raise SchemaError(
            f"{path}: missing column(s) {', '.join(missing)}; "
            f"found {', '.join(table)}"
        )


def _draw_sweep(ax, spec: PanelSpec) -> None:
    for path in spec.inputs:
        table = _read_table(path)
        _require(table, path, ("axis", "infidelity", "stderr"))
        label = path.stem if len(spec.inputs) > 1 else None
        ax.errorbar(
            table["axis"],
            table["infidelity"],
            yerr=table["stderr"],
            marker="o",
            markersize=4,
            capsize=3,
            linewidth=1.2,
            label=label,
        )


def _draw_modes(ax, spec: PanelSpec) -> None:
    path = spec.inputs[0]
    table = _read_table(path)
    _require(table, path, _MODE_COLUMNS)
    for i in (1, 2, 3):
        ax.plot(table["cjunc_ff"], table[f"f{i}_thz"], marker=".", label=f"mode {i}")
    freqs = np.concatenate([table[f"f{i}_thz"] for i in (1, 2, 3)])
    temps = np.concatenate([table[f"t{i}_k"] for i in (1, 2, 3)])
    keep = freqs > 0
    if keep.any():
        # Kelvin scale taken from the table itself, not recomputed.
        ratio = float(np.median(temps[keep] / freqs[keep]))
        right = ax.secondary_yaxis(
            "right", functions=(lambda v: v * ratio, lambda v: v / ratio)
        )
        right.set_ylabel("equivalent temperature (K)")


def _draw_envelope(ax, spec: PanelSpec) -> None:
    path = spec.inputs[0]
    table = _read_table(path)
    _require(table, path, ("q",))
    series = [name for name in table if name.startswith("abs_f_")]
    if not series:
        raise SchemaError(
            f"{path}: no abs_f_* series columns; found {', '.join(table)}"
        )
    for name in series:
        ax.plot(table["q"], table[name], label=name.removeprefix("abs_f_"))


def build_figure(spec: PanelSpec) -> Figure:
    """Draw the panel onto a fresh figure without touching global state."""
    fig = Figure(figsize=(4.8, 3.4), dpi=150)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot()
    if spec.panel in _SWEEP_AXES:
        _draw_sweep(ax, spec)
    elif spec.panel == "s1":
        _draw_modes(ax, spec)
    elif spec.panel == "s2":
        _draw_envelope(ax, spec)
    else:
        raise ValueError(f"unknown panel {spec.panel!r}")
    ax.set_xscale(spec.x_scale)
    ax.set_yscale(spec.y_scale)
    for level in spec.reference_lines:
        ax.axhline(level, linestyle="--", linewidth=1.0, color="0.35")
    ax.set_xlabel(spec.x_label)
    ax.set_ylabel(spec.y_label)
    if ax.get_legend_handles_labels()[1]:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return fig


def render_panel(spec: PanelSpec) -> pathlib.Path:
    """Write the panel as a PNG; same table bytes give same image bytes."""
    fig = build_figure(spec)
    spec.out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out_path, format="png", metadata={"Software": None})
    return spec.out_path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gkpsim-plot",
        description="Render figure panels from simulator CSV tables.",
    )
    parser.add_argument(
        "--panel",
        required=True,
        choices=("a", "b", "c", "d", "s1", "s2"),
        help="panel layout to draw",
    )
    parser.add_argument(
        "--in",
        dest="inputs",
        action="append",
        required=True,
        metavar="CSV",
        help="input table; repeat to overlay sweep series",
    )
    parser.add_argument("--out", required=True, help="output PNG path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = render_panel(build_spec(args.panel, args.inputs, args.out))
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
