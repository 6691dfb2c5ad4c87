"""Figure rendering for the harness CSV schemas.

One renderer per figure kind: BER-vs-SNR curves (semilog y), training MSE
per epoch, BER vs log10 of the scaling factor, detector timing bars, and
the input-ablation comparison. Censored BER points (zero observed errors)
are drawn as open downward markers at their one-error upper bound, never
as zero, since a log axis cannot represent BER 0.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

KINDS = ("ber", "mse", "alpha", "timing", "ablation")

REQUIRED_COLUMNS = {
    "ber": ["detector", "scheme", "location", "snr_db", "bits", "errors",
            "ber", "stderr", "censored"],
    "mse": ["training_snr_db", "epoch", "train_mse", "val_mse"],
    "alpha": ["alpha", "snr_db", "ber"],
    "timing": ["detector", "scheme", "vectors", "wall_seconds", "per_vector_us"],
    "ablation": ["scheme", "input", "snr_db", "bits", "errors", "ber",
                 "stderr", "censored"],
}


class SchemaError(ValueError):
    """Input CSV does not carry the columns the figure kind needs."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input CSVs, figure kind, output image, labels."""

    inputs: tuple
    kind: str
    output: str
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"choose from {', '.join(KINDS)}")
        inputs = tuple(str(p) for p in (
            self.inputs if isinstance(self.inputs, (list, tuple))
            else [self.inputs]))
        object.__setattr__(self, "inputs", inputs)


def read_rows(path: str, kind: str) -> list:
    """Load one CSV and verify it carries every required column."""
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS[kind] if c not in header]
        if missing:
            raise SchemaError(
                f"{path}: missing column(s) {', '.join(missing)} "
                f"(found: {', '.join(header)})")
        return list(reader)


def _as_bool(text: str) -> bool:
    return text.strip().lower() in ("true", "1", "yes")


def _series_key(row: dict) -> str:
    parts = [row.get("detector") or row.get("input"), row.get("scheme"),
             row.get("location")]
    return " ".join(p for p in parts if p)


def _plot_ber_like(ax, rows, label_overrides):
    series = {}
    for row in rows:
        series.setdefault(_series_key(row), []).append(row)
    for key in series:
        pts = sorted(series[key], key=lambda r: float(r["snr_db"]))
        label = label_overrides.get(key, key)
        solid_x = [float(r["snr_db"]) for r in pts if not _as_bool(r["censored"])]
        solid_y = [float(r["ber"]) for r in pts if not _as_bool(r["censored"])]
        line, = ax.semilogy(solid_x, solid_y, marker="o", label=label)
        cens = [r for r in pts if _as_bool(r["censored"])]
        if cens:
            # One-error upper bound, open downward marker: an unobserved
            # rate, not a measurement of zero.
            x = [float(r["snr_db"]) for r in cens]
            y = [1.0 / max(1, int(r["bits"])) for r in cens]
            ax.semilogy(x, y, linestyle="none", marker="v",
                        markerfacecolor="none", color=line.get_color())
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()


def _render_ber(ax, spec: FigureSpec) -> None:
    rows = [r for path in spec.inputs for r in read_rows(path, "ber")]
    _plot_ber_like(ax, rows, spec.labels)
    ax.set_xlabel(spec.xlabel or "transmitted SNR (dB)")
    ax.set_ylabel(spec.ylabel or "BER")


def _render_ablation(ax, spec: FigureSpec) -> None:
    rows = [r for path in spec.inputs for r in read_rows(path, "ablation")]
    _plot_ber_like(ax, rows, spec.labels)
    ax.set_xlabel(spec.xlabel or "transmitted SNR (dB)")
    ax.set_ylabel(spec.ylabel or "BER")


def _render_mse(ax, spec: FigureSpec) -> None:
    rows = [r for path in spec.inputs for r in read_rows(path, "mse")]
    series = {}
    for row in rows:
        series.setdefault(float(row["training_snr_db"]), []).append(row)
    for snr in sorted(series):
        pts = sorted(series[snr], key=lambda r: int(r["epoch"]))
        label = spec.labels.get(f"{snr:g}", f"training SNR {snr:g} dB")
        ax.semilogy([int(r["epoch"]) for r in pts],
                    [float(r["val_mse"]) for r in pts],
                    marker="o", label=label)
    ax.set_xlabel(spec.xlabel or "epoch")
    ax.set_ylabel(spec.ylabel or "validation MSE")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()


def _render_alpha(ax, spec: FigureSpec) -> None:
    rows = [r for path in spec.inputs for r in read_rows(path, "alpha")]
    series = {}
    for row in rows:
        series.setdefault(float(row["snr_db"]), []).append(row)
    for snr in sorted(series):
        pts = sorted(series[snr], key=lambda r: float(r["alpha"]))
        xs, ys = [], []
        for r in pts:
            ber = float(r["ber"])
            if math.isnan(ber):
                continue  # diverged training cell
            xs.append(math.log10(float(r["alpha"])))
            ys.append(max(ber, 1e-12))
        label = spec.labels.get(f"{snr:g}", f"SNR {snr:g} dB")
        ax.semilogy(xs, ys, marker="o", label=label)
    ax.set_xlabel(spec.xlabel or "log10 scaling factor")
    ax.set_ylabel(spec.ylabel or "BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()


def _render_timing(ax, spec: FigureSpec) -> None:
    rows = [r for path in spec.inputs for r in read_rows(path, "timing")]
    schemes = sorted({r["scheme"] for r in rows})
    detectors = list(dict.fromkeys(r["detector"] for r in rows))
    width = 0.8 / max(1, len(detectors))
    for i, det in enumerate(detectors):
        xs, ys = [], []
        for j, scheme in enumerate(schemes):
            match = [float(r["wall_seconds"]) for r in rows
                     if r["detector"] == det and r["scheme"] == scheme]
            if match:
                xs.append(j + i * width)
                ys.append(match[0])
        ax.bar(xs, ys, width=width, label=spec.labels.get(det, det))
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(schemes))])
    ax.set_xticklabels(schemes)
    ax.set_ylabel(spec.ylabel or "wall time (s)")
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend()


RENDERERS = {
    "ber": _render_ber,
    "mse": _render_mse,
    "alpha": _render_alpha,
    "timing": _render_timing,
    "ablation": _render_ablation,
}


def render(spec: FigureSpec) -> str:
    """Draw the figure and write the image file; returns the output path."""
    fig, ax = plt.subplots(figsize=(7, 5))
    try:
        RENDERERS[spec.kind](ax, spec)
        if spec.title:
            ax.set_title(spec.title)
        fig.tight_layout()
        out = Path(spec.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out)
    finally:
        plt.close(fig)
    return str(spec.output)
