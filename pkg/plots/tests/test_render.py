"""Rendering tests, including the golden-file check on vector output.

The fixture CSVs under ``tests/data`` were produced by the experiment CLI
(``invexp run --preset fig2-stationary-tight --reps 40 --seed 13``); the
golden SVG regenerates via
``abplots render --panel tests/data/fig2_stationary_tight_raw.csv
--gte 0.114197 --out tests/golden/fig2_stationary_tight.svg``.
"""

import re
from pathlib import Path

import pytest

from abplots.cli import main
from abplots.render import PanelSpec, SchemaError, render_summary, render_violin

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"
RAW = DATA / "fig2_stationary_tight_raw.csv"
SUMMARY = DATA / "fig2_stationary_tight_summary.csv"
TRUE_GTE = 0.114197
RED_STROKE = "#d62728"


def violin_count(svg_text: str) -> int:
    return len(re.findall(r'id="FillBetweenPolyCollection_\d+"', svg_text))


def render_fixture(tmp_path, **overrides) -> Path:
    out = tmp_path / "panel.svg"
    spec = PanelSpec(csv_path=str(RAW), true_gte=TRUE_GTE, out_path=str(out), **overrides)
    render_violin(spec)
    return out


def test_golden_file_vector_output(tmp_path):
    out = render_fixture(tmp_path)
    assert out.read_bytes() == (GOLDEN / "fig2_stationary_tight.svg").read_bytes()


def test_violin_per_design_and_reference_line(tmp_path):
    text = render_fixture(tmp_path).read_text()
    assert violin_count(text) == 4  # SW, IR, PR, SR
    assert RED_STROKE in text


def test_reference_line_moves_with_gte(tmp_path):
    a = render_fixture(tmp_path).read_text()
    out_b = tmp_path / "panel_b.svg"
    render_violin(PanelSpec(csv_path=str(RAW), true_gte=0.9, out_path=str(out_b)))
    assert a != out_b.read_text()


def test_rendering_is_deterministic(tmp_path):
    first = render_fixture(tmp_path).read_bytes()
    second = render_fixture(tmp_path).read_bytes()
    assert first == second


def test_single_design_csv_renders_one_violin(tmp_path):
    source = RAW.read_text().strip().split("\n")
    kept = [source[0]] + [line for line in source[1:] if ",SW," in line]
    single = tmp_path / "single.csv"
    single.write_text("\n".join(kept) + "\n")
    out = tmp_path / "single.svg"
    render_violin(PanelSpec(csv_path=str(single), true_gte=TRUE_GTE, out_path=str(out)))
    assert violin_count(out.read_text()) == 1


def test_missing_estimate_column_names_it(tmp_path):
    broken = tmp_path / "broken.csv"
    broken.write_text("scenario,design,estimator,replication\nx,SW,ipw,0\n")
    with pytest.raises(SchemaError, match="estimate"):
        render_violin(PanelSpec(csv_path=str(broken), true_gte=0.0, out_path=str(tmp_path / "x.svg")))


def test_too_few_replications_rejected(tmp_path):
    source = RAW.read_text().strip().split("\n")
    only_first_rep = [line for line in source[1:] if ",ipw,0," in line]
    few = tmp_path / "few.csv"
    few.write_text("\n".join([source[0]] + only_first_rep) + "\n")
    with pytest.raises(SchemaError, match="at least 2"):
        render_violin(PanelSpec(csv_path=str(few), true_gte=0.0, out_path=str(tmp_path / "x.svg")))


def test_unknown_estimator_rejected(tmp_path):
    with pytest.raises(SchemaError, match="winsorized"):
        render_violin(PanelSpec(csv_path=str(RAW), true_gte=0.0,
                                out_path=str(tmp_path / "x.svg"), estimator="winsorized"))


def test_png_output(tmp_path):
    out = tmp_path / "panel.png"
    render_violin(PanelSpec(csv_path=str(RAW), true_gte=TRUE_GTE, out_path=str(out), fmt="png"))
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_summary_bar_chart(tmp_path):
    out = tmp_path / "summary.svg"
    render_summary(str(SUMMARY), str(out))
    text = out.read_text()
    assert RED_STROKE in text  # zero line
    # four bias bars on top of the figure and axes background patches
    assert len(re.findall(r'id="patch_\d+"', text)) >= 6


def test_summary_missing_column(tmp_path):
    broken = tmp_path / "broken.csv"
    broken.write_text(
        "scenario,design,estimator,mean,sd,ci_low,ci_high,true_gte\n"
        "x,SW,ipw,1.0,0.1,0.9,1.1,0.5\n"
    )
    with pytest.raises(SchemaError, match="column 'bias'"):
        render_summary(str(broken), str(tmp_path / "x.svg"))


# ------------------------------------------------------------------------ CLI


def test_cli_panel_render(tmp_path, capsys):
    out = tmp_path / "cli.svg"
    code = main(["render", "--panel", str(RAW), "--gte", str(TRUE_GTE), "--out", str(out)])
    assert code == 0
    assert out.exists()


def test_cli_requires_gte_for_panel(tmp_path, capsys):
    code = main(["render", "--panel", str(RAW), "--out", str(tmp_path / "x.svg")])
    assert code == 2
    assert "--gte" in capsys.readouterr().err


def test_cli_schema_error_exit_code(tmp_path, capsys):
    broken = tmp_path / "broken.csv"
    broken.write_text("scenario,design\nx,SW\n")
    code = main(["render", "--panel", str(broken), "--gte", "0", "--out", str(tmp_path / "x.svg")])
    assert code == 2
    assert "column" in capsys.readouterr().err


def test_cli_summary_render(tmp_path):
    out = tmp_path / "summary.png"
    code = main(["render", "--summary", str(SUMMARY), "--out", str(out), "--format", "png"])
    assert code == 0
    assert out.exists()
