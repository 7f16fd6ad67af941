"""Rendering layer: schema checks, determinism, and panel layouts."""

import pytest

from gkpsim.figures import (
    GATE_INFIDELITY_REFERENCE,
    SchemaError,
    build_figure,
    build_spec,
    main,
    render_panel,
)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

MODE_HEADER = "cjunc_ff,f1_thz,f2_thz,f3_thz,t1_k,t2_k,t3_k"


def write_sweep(path, rows):
    lines = ["axis,infidelity,stderr,n_traj,n_resample,seed"]
    for axis, infidelity, stderr in rows:
        lines.append(f"{axis},{infidelity},{stderr},8,1,1")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_modes(path, cjunc=(0.05, 0.1, 0.2)):
    kelvin_per_thz = 47.9924
    lines = [MODE_HEADER]
    for c in cjunc:
        f = (0.04, 0.045, 0.075)
        t = tuple(v * kelvin_per_thz for v in f)
        lines.append(",".join(f"{v:g}" for v in (c, *f, *t)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def sweep_csv(tmp_path):
    return write_sweep(
        tmp_path / "gate_time_sweep.csv",
        [(3.0, 1.4e-4, 2e-5), (30.0, 3.7e-5, 8e-6), (9400.0, 3.6e-5, 6e-6)],
    )


class TestSweepPanels:
    def test_renders_png(self, sweep_csv, tmp_path, capsys):
        out = tmp_path / "panel_a.png"
        rc = main(["--panel", "a", "--in", str(sweep_csv), "--out", str(out)])
        assert rc == 0
        assert out.read_bytes().startswith(PNG_MAGIC)
        assert str(out) in capsys.readouterr().out

    def test_same_table_gives_same_bytes(self, sweep_csv, tmp_path):
        first = tmp_path / "first.png"
        second = tmp_path / "second.png"
        render_panel(build_spec("a", [sweep_csv], first))
        render_panel(build_spec("a", [sweep_csv], second))
        assert first.read_bytes() == second.read_bytes()

    @pytest.mark.parametrize("panel", ["b", "c", "d"])
    def test_reference_line_rendered(self, sweep_csv, tmp_path, panel):
        fig = build_figure(build_spec(panel, [sweep_csv], tmp_path / "p.png"))
        dashed = [
            line
            for line in fig.axes[0].get_lines()
            if line.get_linestyle() == "--"
            and line.get_ydata()[0] == GATE_INFIDELITY_REFERENCE
        ]
        assert dashed

    def test_header_only_table_renders_axes(self, tmp_path):
        csv = tmp_path / "timing_sweep.csv"
        csv.write_text("axis,infidelity,stderr,n_traj,n_resample,seed\n")
        out = tmp_path / "panel_b.png"
        assert main(["--panel", "b", "--in", str(csv), "--out", str(out)]) == 0
        assert out.read_bytes().startswith(PNG_MAGIC)

    def test_overlayed_series_are_labeled(self, tmp_path):
        one = write_sweep(tmp_path / "noise_sweep_dd0.csv", [(0.25, 2e-3, 4e-4)])
        two = write_sweep(tmp_path / "noise_sweep_dd4.csv", [(0.25, 9e-5, 2e-5)])
        fig = build_figure(build_spec("d", [one, two], tmp_path / "d.png"))
        legend = fig.axes[0].get_legend()
        assert legend is not None
        labels = [text.get_text() for text in legend.get_texts()]
        assert labels == ["noise_sweep_dd0", "noise_sweep_dd4"]

    def test_missing_column_is_named(self, tmp_path, capsys):
        csv = tmp_path / "broken.csv"
        csv.write_text("axis,infidelity\n1.0,2e-3\n")
        rc = main(["--panel", "c", "--in", str(csv), "--out", str(tmp_path / "c.png")])
        assert rc == 1
        assert "stderr" in capsys.readouterr().err

    def test_non_numeric_cell_rejected(self, tmp_path):
        csv = tmp_path / "words.csv"
        csv.write_text("axis,infidelity,stderr\nlow,2e-3,1e-4\n")
        with pytest.raises(SchemaError, match="non-numeric"):
            build_figure(build_spec("b", [csv], tmp_path / "b.png"))

    def test_ragged_row_rejected(self, tmp_path):
        csv = tmp_path / "ragged.csv"
        csv.write_text("axis,infidelity,stderr\n1.0,2e-3\n")
        with pytest.raises(SchemaError, match="fields"):
            build_figure(build_spec("b", [csv], tmp_path / "b.png"))


class TestModePanel:
    def test_dual_axis_and_three_curves(self, tmp_path):
        csv = write_modes(tmp_path / "modes.csv")
        fig = build_figure(build_spec("s1", [csv], tmp_path / "s1.png"))
        main_axes = fig.axes[0]
        assert len(main_axes.get_lines()) == 3
        assert len(main_axes.child_axes) == 1  # secondary Kelvin axis attached
        assert main_axes.child_axes[0].get_ylabel() == "equivalent temperature (K)"

    def test_missing_mode_column_is_named(self, tmp_path):
        csv = tmp_path / "modes.csv"
        header = MODE_HEADER.replace(",t3_k", "")
        csv.write_text(header + "\n0.1,0.04,0.045,0.075,1.9,2.1\n")
        with pytest.raises(SchemaError, match="t3_k"):
            build_figure(build_spec("s1", [csv], tmp_path / "s1.png"))

    def test_rejects_multiple_inputs(self, tmp_path):
        csv = write_modes(tmp_path / "modes.csv")
        with pytest.raises(ValueError, match="exactly one"):
            build_spec("s1", [csv, csv], tmp_path / "s1.png")


class TestEnvelopePanel:
    def test_one_curve_per_series_column(self, tmp_path):
        csv = tmp_path / "envelope_ft.csv"
        csv.write_text(
            "q,abs_f_alpha_0,abs_f_alpha_1e-05\n"
            "0.0,1.0,1.0\n0.5,0.3,0.28\n1.0,0.02,0.015\n"
        )
        fig = build_figure(build_spec("s2", [csv], tmp_path / "s2.png"))
        labels = [t.get_text() for t in fig.axes[0].get_legend().get_texts()]
        assert labels == ["alpha_0", "alpha_1e-05"]

    def test_requires_series_columns(self, tmp_path):
        csv = tmp_path / "envelope_ft.csv"
        csv.write_text("q,other\n0.0,1.0\n")
        with pytest.raises(SchemaError, match="abs_f_"):
            build_figure(build_spec("s2", [csv], tmp_path / "s2.png"))


class TestCli:
    def test_unknown_panel_rejected_by_parser(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["--panel", "z", "--in", "x.csv", "--out", str(tmp_path / "z.png")])

    def test_unknown_spec_panel_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown panel"):
            build_spec("z", [tmp_path / "x.csv"], tmp_path / "z.png")

    def test_absent_input_file_fails_cleanly(self, tmp_path, capsys):
        rc = main(
            ["--panel", "a", "--in", str(tmp_path / "no.csv"), "--out", str(tmp_path / "a.png")]
        )
        assert rc == 1
        assert "error:" in capsys.readouterr().err
