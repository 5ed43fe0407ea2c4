"""CSV / JSON / SVG output for phase sweeps, certificates and witnesses."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .io import dump_json, to_jsonable

PHASE_COLUMNS = [
    "size", "n", "rescaled_n", "trials", "successes",
    "success_fraction", "mean_l2_error", "nonconverged", "lambda",
]
FORMATS = ("csv", "json", "svg")


def _as_dict(result):
    if isinstance(result, dict):
        return result
    return result.to_dict()


def _is_phase(d):
    return "rows" in d and "config" in d


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def phase_csv(d) -> str:
    """One row per (size, n); the metrics are columns."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PHASE_COLUMNS)
    for row in d.get("rows", []):
        w.writerow([_fmt(row[c]) for c in PHASE_COLUMNS])
    return buf.getvalue()


def _flatten(d, prefix=""):
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        elif isinstance(v, (list, tuple)):
            yield key, " ".join(_fmt(x) for x in v)
        else:
            yield key, _fmt(v)


def keyvalue_csv(d) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in _flatten(to_jsonable(d)):
        w.writerow([k, v])
    return buf.getvalue()


def phase_svg(d) -> str:
    """Two panels: success fraction against n and against the rescaled axis."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = d.get("rows", [])
    sizes = sorted({r["size"] for r in rows})
    with matplotlib.rc_context({"svg.hashsalt": "gdpen", "svg.fonttype": "none",
                                "path.simplify": False}):
        fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
        for size in sizes:
            pts = sorted((r["n"], r["rescaled_n"], r["success_fraction"]) for r in rows if r["size"] == size)
            n, rn, fr = (np.array(c) for c in zip(*pts))
            axes[0].plot(n, fr, marker="o", ms=3, label=str(size))
            axes[1].plot(rn, fr, marker="o", ms=3, label=str(size))
        axes[0].set_xlabel("n")
        axes[1].set_xlabel("n / (max group size * log #groups)")
        for ax in axes:
            ax.set_ylabel("success fraction")
            ax.set_ylim(-0.02, 1.02)
            ax.grid(alpha=0.3)
        if sizes:
            axes[1].legend(title="size", fontsize=8)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return buf.getvalue()


def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_report(result, out_dir, formats=FORMATS, stem="result") -> list:
    """Write ``result`` to ``out_dir/stem.{fmt}``; returns the written paths.

    SVG is only defined for phase sweeps.
    """
    d = _as_dict(result)
    phase = _is_phase(d)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
    written = []
    for fmt in formats:
        path = out / f"{stem}.{fmt}"
        if fmt == "json":
            try:
                dump_json(d, path)
            except OSError as exc:
                raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
        elif fmt == "csv":
            _write(path, phase_csv(d) if phase else keyvalue_csv(d))
        elif fmt == "svg":
            if not phase:
                raise ValueError("SVG output needs a phase result")
            _write(path, phase_svg(d))
        else:
            raise ValueError(f"unknown format {fmt!r}")
        written.append(path)
    return written
