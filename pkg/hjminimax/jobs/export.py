"""Run artifacts: CSV tables, manifest.json, a per-run README and a plot script.

Data files carry no wall-clock content so identical configs give
byte-identical outputs.
"""
import json
from pathlib import Path

import pandas as pd

from ..nonsmooth.grid_function import CSV_FLOAT_FORMAT

COLUMN_DOCS = {
    "t": "time",
    "x": "space node",
    "x0": "source point of the characteristic",
    "y": "momentum carried by the characteristic",
    "z": "value carried by the characteristic",
    "u": "solution value",
    "value": "solution value at the final time",
    "lip": "Lipschitz certificate of the snapshot",
    "fold_flag": "+1 where dx/dx0 > 0, -1 past a fold, 0 degenerate",
    "minimax": "iterated minimax solution",
    "reference": "Lax-Friedrichs viscosity reference",
    "hopf_lax": "Hopf-Lax formula with discount (convex h only)",
    "abs_error": "|minimax - reference|",
    "minimax_vs_reference": "sup over K of |minimax - reference|",
    "minimax_vs_hopf_lax": "sup over K of |minimax - Hopf-Lax|",
    "reference_vs_hopf_lax": "sup over K of |reference - Hopf-Lax|",
    "norm": "partition norm (largest gap)",
    "steps": "number of minimax steps after admissible subdivision",
    "sup_error": "sup over [0, T] x K of |minimax - reference|",
    "final_error": "sup over K of |minimax - reference| at T",
    "final_lip": "Lipschitz certificate at T",
    "check": "diagnostic name",
    "case": "case index within the diagnostic",
    "observed": "measured quantity",
    "allowed": "tolerance or bound it is compared with",
    "passed": "1 when the property holds",
    "dx": "grid spacing",
    "dt": "time step",
    "change": "sup change of the final snapshot from the previous level",
    "constant": "change / dx",
    "fraction": "share of eligible nodes whose (x, u) lies within 2 cells of the front",
    "eligible": "nodes farther than 2 cells from a fold position",
    "on_front": "eligible nodes within 2 cells of the front",
}


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path


def write_json(payload: dict, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    return path


def write_manifest(output_dir: Path, subcommand: str, config: dict, files: dict[str, list[str]],
                   summary: dict | None = None) -> Path:
    """manifest.json: subcommand, the validated config, the data files and their columns."""
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "files": {name: {"columns": columns} for name, columns in sorted(files.items())},
        "summary": summary or {},
    }
    return write_json(manifest, Path(output_dir) / "manifest.json")


def write_run_readme(output_dir: Path, subcommand: str, name: str, files: dict[str, list[str]]) -> Path:
    """README.md documenting every CSV column of this run."""
    lines = [f"# {name}: {subcommand}", "", "Data files of this run. Floats use `%.12e`.", ""]
    for fname, columns in sorted(files.items()):
        lines.append(f"## {fname}")
        lines.append("")
        lines.append("| column | meaning |")
        lines.append("|---|---|")
        for col in columns:
            lines.append(f"| `{col}` | {COLUMN_DOCS.get(col, col)} |")
        lines.append("")
    path = Path(output_dir) / "README.md"
    path.write_text("\n".join(lines))
    return path


# plot scripts; (file, x column, y column, group column or None)
PlotSpec = tuple[str, str, str, str | None]


def _python_script(plots: list[PlotSpec]) -> str:
    out = [
        "import matplotlib.pyplot as plt",
        "import pandas as pd",
        "",
    ]
    for fname, xcol, ycol, group in plots:
        out.append(f"df = pd.read_csv({fname!r}, comment='#')")
        out.append("fig, ax = plt.subplots()")
        if group:
            out.append(f"for key, part in df.groupby({group!r}):")
            out.append(f"    ax.plot(part[{xcol!r}], part[{ycol!r}], label=f'{group}={{key:.4g}}')")
            out.append("ax.legend(fontsize='small')")
        else:
            out.append(f"ax.plot(df[{xcol!r}], df[{ycol!r}], marker='o')")
        out.append(f"ax.set_xlabel({xcol!r})")
        out.append(f"ax.set_ylabel({ycol!r})")
        out.append(f"fig.savefig({fname.rsplit('.', 1)[0] + '_' + ycol + '.png'!r})")
        out.append("")
    return "\n".join(out)


def _gnuplot_script(plots: list[PlotSpec], columns: dict[str, list[str]]) -> str:
    out = ["set datafile separator ','", "set key autotitle columnhead", "set terminal pngcairo", ""]
    for fname, xcol, ycol, group in plots:
        cols = columns[fname]
        xi, yi = cols.index(xcol) + 1, cols.index(ycol) + 1
        out.append(f"set output '{fname.rsplit('.', 1)[0]}_{ycol}.png'")
        out.append(f"set xlabel '{xcol}'")
        out.append(f"set ylabel '{ycol}'")
        if group:
            # gnuplot splits blocks on blank lines only; draw the cloud per group as points
            out.append(f"plot '{fname}' using {xi}:{yi} with points pointtype 7 pointsize 0.3 title '{ycol}'")
        else:
            out.append(f"plot '{fname}' using {xi}:{yi} with linespoints title '{ycol}'")
        out.append("")
    return "\n".join(out)


def write_plot_script(output_dir: Path, kind: str, plots: list[PlotSpec],
                      columns: dict[str, list[str]]) -> Path | None:
    """plot.py (matplotlib) or plot.gp (gnuplot) reading the CSVs of the run; None for kind 'none'."""
    if kind == "none" or not plots:
        return None
    if kind == "python":
        path = Path(output_dir) / "plot.py"
        path.write_text(_python_script(plots))
    else:
        path = Path(output_dir) / "plot.gp"
        path.write_text(_gnuplot_script(plots, columns))
    return path
