# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Plain-text reports."""

from __future__ import annotations

import math
import typing as ty

if ty.TYPE_CHECKING:
    from .ablation import AblationTable
    from .costs import CostReport
    from .evaluate import EvalMetrics, ZeroShotReport


def _format_count(value: int) -> str:
    return f"{value:,}".replace(",", " ")


def generate_cost_table(report: CostReport) -> ty.Iterable[str]:
    yield f"{'module':<12} {'FLOPs':>18} {'trainable':>12} {'frozen':>14}"
    for entry in report.entries:
        yield (
            f"{entry.name:<12} {_format_count(entry.flops):>18} "
            f"{_format_count(entry.trainable):>12} "
            f"{_format_count(entry.frozen):>14}"
        )

    yield ""
    yield f"total FLOPs:     {_format_count(report.flops)} ({report.gflops:.3f} G)"
    yield f"trainable:       {_format_count(report.trainable)}"
    yield f"frozen:          {_format_count(report.frozen)}"
    yield f"trainable share: {report.trainable_share:.2%}"
    yield f"backward touch:  {_format_count(report.backward_param_touch)}"


def _pct(value: float) -> str:
    return "-" if math.isnan(value) else f"{value * 100:.1f}"


def generate_metrics(metrics: EvalMetrics) -> ty.Iterable[str]:
    yield f"{metrics.protocol}: {metrics.count} clips"
    yield f"Top-1: {_pct(metrics.top1)}  Top-5: {_pct(metrics.top5)}"
    for name, acc in zip(metrics.classes, metrics.per_class, strict=True):
        yield f"  {name:<16} {_pct(acc):>6}"


def generate_zero_shot(report: ZeroShotReport) -> ty.Iterable[str]:
    yield f"zero-shot on {', '.join(report.held_out)}"
    for num, acc in enumerate(report.top1):
        yield f"  split {num}: {_pct(acc)}"

    yield f"Top-1: {_pct(report.mean)} ± {_pct(report.std)}"


def generate_ablation(table: AblationTable) -> ty.Iterable[str]:
    yield f"ablation: {table.suite}"
    yield "  ".join(f"{col:>12}" for col in table.columns)
    for row in table.rows:
        yield "  ".join(
            f"{row[col]:>12.4f}" if isinstance(row[col], float) else f"{row[col]!s:>12}"
            for col in table.columns
        )
