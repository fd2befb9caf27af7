"""SVG scatter frames of a classification for one-input/one-output data."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from equiclass.model import CharacteristicTable, Classification  # noqa: E402

# squares, circles and diamonds first; extra shapes only when S > 3
MARKERS = ("s", "o", "D", "^", "v", "P", "X", "*")


def _marker(s: int) -> str:
    return MARKERS[s % len(MARKERS)]


def render_frame(
    table: CharacteristicTable,
    classification: Classification,
    path: Path,
    title: str,
) -> Path:
    """One glyph per object, shaped by category; x is the input, y the output.

    There is no legend (its sample markers would add glyphs); the title
    names the shape of every category instead.
    """
    if table.N != 1 or table.M != 1:
        raise ValueError("scatter frames need exactly one input and one output")
    plt.rcParams["svg.hashsalt"] = "equiclass"
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    names = {"s": "squares", "o": "circles", "D": "diamonds"}
    key = []
    for s, cat in enumerate(classification.categories):
        xs = [table.inputs[0, t] for t in cat]
        ys = [table.outputs[0, t] for t in cat]
        m = _marker(s)
        points = ax.scatter(
            xs, ys, marker=m, s=36, facecolors="none" if m == "o" else "C%d" % s,
            edgecolors="C%d" % s, linewidths=1.0,
        )
        points.set_gid(f"category-{s + 1}")
        key.append(f"{s + 1}: {names.get(m, m)}")
    ax.set_xlabel("input")
    ax.set_ylabel("output")
    ax.set_title(f"{title}  ({'; '.join(key)})", fontsize=9)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def render_history(table, history, directory: Path) -> list[Path]:
    out = []
    for k, cls in enumerate(history):
        label = "Initial" if k == 0 else f"Step {k}"
        if cls.total is not None:
            label += f", total P = {cls.total:.4f}"
        out.append(render_frame(table, cls, Path(directory) / f"step_{k}.svg", label))
    return out
