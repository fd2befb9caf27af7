"""Command-line entry point: ``equiclass classify``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from equiclass import solver
from equiclass.errors import EquiclassError, MissingColumn, ParseError
from equiclass.model import (
    CharacteristicTable,
    Classification,
    UncertaintySpec,
    partition_is_valid,
    validate_table,
)
from equiclass.parallel import WorkerPool
from equiclass.proximity import ProximityBook, ProximitySettings
from equiclass.search import run_search

SCHEMA_VERSION = 1
log = logging.getLogger("equiclass")


@dataclass(frozen=True)
class RunConfig:
    categories: int
    input_columns: tuple[str, ...]
    output_columns: tuple[str, ...]
    uncertainty: str = "identity"
    delta: float = 1e-3
    epsilon: float = 1e-4
    eps_eff: float = 1e-6
    max_iters: int = 100
    workers: int = 1
    scale_data: bool = False
    emit_plots: bool = False
    id_column: str | None = None

    def __post_init__(self):
        if self.categories < 1:
            raise ValueError("categories must be at least 1")
        if not self.input_columns or not self.output_columns:
            raise ValueError("need at least one input and one output column")
        if set(self.input_columns) & set(self.output_columns):
            raise ValueError("input and output columns must be disjoint")
        for name in ("delta", "epsilon", "eps_eff"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1 or self.workers < 1:
            raise ValueError("max_iters and workers must be positive")
        parse_uncertainty(self.uncertainty)

    @property
    def settings(self) -> ProximitySettings:
        return ProximitySettings(self.epsilon, self.delta, self.eps_eff, self.max_iters)


def parse_uncertainty(text: str) -> UncertaintySpec:
    if text == "identity":
        return UncertaintySpec.identity()
    if text.startswith("diagonal:"):
        try:
            weights = [float(w) for w in text[len("diagonal:"):].split(",")]
        except ValueError:
            raise ValueError(f"bad diagonal weights in {text!r}") from None
        return UncertaintySpec.diagonal(weights)
    raise ValueError(f"unknown uncertainty {text!r}; use identity or diagonal:w1,w2,...")


def ingest_csv(path, config: RunConfig) -> CharacteristicTable:
    """One object per data row; columns picked by name from the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("file has no header row", row=0) from None
        rows = [r for r in reader if any(cell.strip() for cell in r)]
    wanted = list(config.input_columns) + list(config.output_columns)
    if config.id_column:
        wanted.append(config.id_column)
    for name in wanted:
        if name not in header:
            raise MissingColumn(f"column {name!r} not in header {header}")
    if not rows:
        raise ParseError("no data rows", row=1)
    id_col = config.id_column or ("id" if "id" in header else None)

    def numbers(names):
        out = np.empty((len(names), len(rows)))
        for a, name in enumerate(names):
            k = header.index(name)
            for t, r in enumerate(rows):
                cell = r[k].strip() if k < len(r) else ""
                try:
                    out[a, t] = float(cell)
                except ValueError:
                    # row numbers count the header as row 1
                    raise ParseError(
                        f"row {t + 2}, column {name!r}: {cell!r} is not a number",
                        row=t + 2, column=name,
                    ) from None
        return out

    X = numbers(config.input_columns)
    Y = numbers(config.output_columns)
    if id_col:
        ids = [r[header.index(id_col)].strip() for r in rows]
    else:
        ids = [str(t + 1) for t in range(len(rows))]
    if len(set(ids)) != len(ids):
        raise ParseError(f"object ids in column {id_col!r} are not unique", column=id_col)
    table = CharacteristicTable(tuple(ids), X, Y)
    validate_table(table)
    if config.scale_data:
        table = min_max_scale(table)
    return table


def min_max_scale(table: CharacteristicTable, low: float = 0.1) -> CharacteristicTable:
    """Map each characteristic affinely onto [low, 1]; constant rows become 1."""

    def scale(mat):
        out = np.ones_like(mat)
        for r in range(mat.shape[0]):
            lo, hi = mat[r].min(), mat[r].max()
            if hi > lo:
                out[r] = low + (1.0 - low) * (mat[r] - lo) / (hi - lo)
        return out

    return CharacteristicTable(table.object_ids, scale(table.inputs), scale(table.outputs))


def _classification_entry(table, cls: Classification, book: ProximityBook, step: int) -> dict:
    ids = table.object_ids
    return {
        "step": step,
        "phase": "initial" if step == 0 else "improvement",
        "categories": [[ids[t] for t in cat] for cat in cls.categories],
        "category_indices": [list(cat) for cat in cls.categories],
        "proximity": list(cls.proximity),
        "total": cls.total,
        "details": [book[cat].as_dict() for cat in cls.categories],
    }


def history_table(history: list[Classification]) -> str:
    """Plain-text table, one row per step: P^1 .. P^S and the total."""
    S = history[0].S
    head = ["", *[f"P^{s + 1}" for s in range(S)], "Total"]
    lines = ["\t".join(head)]
    for k, cls in enumerate(history):
        name = "Initial" if k == 0 else ("Final" if k == len(history) - 1 else f"Step {k}")
        lines.append("\t".join([name, *[f"{p:.4f}" for p in cls.proximity], f"{cls.total:.4f}"]))
    if len(history) == 1:
        lines.append("\t".join(["Final", *lines[1].split("\t")[1:]]))
    return "\n".join(lines)


def descent_summary(results) -> dict:
    """Exit reasons, worst final direction value and longest loop over all evaluated categories."""
    exits: dict[str, int] = {}
    worst, longest = None, 0
    for res in results:
        exits[res.exit_reason] = exits.get(res.exit_reason, 0) + 1
        if res.final_direction_value is not None:
            v = float(res.final_direction_value)
            worst = v if worst is None else min(worst, v)
        longest = max(longest, len(res.trace) - 1)
    return {
        "exit_reasons": dict(sorted(exits.items())),
        "min_final_direction_value": worst,
        "max_iterations": longest,
    }


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def run(config: RunConfig, data_path, out_dir) -> dict:
    """Classify the CSV at ``data_path`` and write the report files into ``out_dir``."""
    started = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = ingest_csv(data_path, config)
    spec = parse_uncertainty(config.uncertainty)
    if spec.kind == "diagonal" and len(spec.weights) != table.T:
        raise EquiclassError(f"{len(spec.weights)} diagonal weights for {table.T} objects")
    settings = config.settings
    solver.reset_stats()
    with WorkerPool(config.workers) as pool:
        book = ProximityBook(table, spec, settings, pool)
        result = run_search(table, config.categories, spec, settings, pool, book)
    history, candidates, norms = result.history, result.candidates, result.norms

    for cls in history:
        if not partition_is_valid(cls, table.T, config.categories):
            raise EquiclassError("search produced an invalid partition")

    final = history[-1]
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": {
            **{k: v for k, v in asdict(config).items() if k != "workers"},
            "data": str(data_path),
        },
        "objects": {
            "ids": list(table.object_ids),
            "inputs": table.inputs.tolist(),
            "outputs": table.outputs.tolist(),
            "sigma_norm": [float(v) for v in norms],
        },
        "seeding": [
            {
                "sizes": list(c.sizes),
                "categories": [list(cat) for cat in c.classification.categories],
                "proximity": list(c.classification.proximity),
                "total": c.classification.total,
            }
            for c in candidates
        ],
        "seed_sizes": list(result.seed_sizes),
        "history": [_classification_entry(table, cls, book, k) for k, cls in enumerate(history)],
        "final": {"total": final.total, "proximity": list(final.proximity)},
        "table": history_table(history).split("\n"),
        "solver": dict(sorted(solver.STATS.items())),
        "categories_evaluated": len(book.results),
        "descent": descent_summary(book.results.values()),
        "timing": {
            "workers": config.workers,
            "phases": result.phases,
            "wall_clock": time.perf_counter() - started,
        },
    }
    (out_dir / "report.json").write_text(json.dumps(_json_safe(report), indent=2) + "\n")
    labels = final.labels(table.T)
    with open(out_dir / "classification.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writerow(["object_id", "category"])
        for t, oid in enumerate(table.object_ids):
            writer.writerow([oid, labels[t] + 1])
    if config.emit_plots:
        if table.N == 1 and table.M == 1:
            from equiclass.plots import render_history

            render_history(table, history, out_dir / "plots")
        else:
            log.warning("plots need one input and one output; skipped")
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="equiclass")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("classify", help="partition objects by proximity to equitable efficiency")
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--inputs", required=True, help="comma-separated input column names")
    p.add_argument("--outputs", required=True, help="comma-separated output column names")
    p.add_argument("--categories", required=True, type=int)
    p.add_argument("--id-column", default=None)
    p.add_argument("--uncertainty", default="identity", help="identity or diagonal:w1,w2,...")
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--eps-eff", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--scale", action="store_true", help="min-max scale every column to [0.1, 1]")
    p.add_argument("--plots", action="store_true", help="write plots/step_<k>.svg (1 input, 1 output)")
    p.add_argument("--out", default="equiclass-out")
    p.add_argument("-q", "--quiet", action="store_true")
    return parser


def _columns(text: str) -> tuple[str, ...]:
    return tuple(c.strip() for c in text.split(",") if c.strip())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        config = RunConfig(
            categories=args.categories,
            input_columns=_columns(args.inputs),
            output_columns=_columns(args.outputs),
            uncertainty=args.uncertainty,
            delta=args.delta,
            epsilon=args.epsilon,
            eps_eff=args.eps_eff,
            max_iters=args.max_iters,
            workers=args.workers,
            scale_data=args.scale,
            emit_plots=args.plots,
            id_column=args.id_column,
        )
        report = run(config, args.data, args.out)
    except (EquiclassError, ValueError, OSError) as exc:
        print(f"equiclass: error: {exc}", file=sys.stderr)
        return 2
    print("\n".join(report["table"]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
