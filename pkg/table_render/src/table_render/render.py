"""Deterministic table-to-PNG rendering.

Input is the benchmark dataset JSONL: each line carries a ``table`` object
with ``columns`` (key/display/kind) and ``rows`` of ``{"v": ..., "p": ...}``
cells. Rendering pins the backend, the font, and the PNG metadata, so the
same job produces the same bytes on a fixed font set.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


class RenderError(Exception):
    pass


class EmptyTable(RenderError):
    pass


@dataclass(frozen=True)
class Style:
    font_size: int = 10
    cell_width: float = 1.5   # inches per column
    cell_height: float = 0.32  # inches per row
    dpi: int = 100
    header_color: str = "#d9d9d9"

    @classmethod
    def from_file(cls, path: str | Path) -> "Style":
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
        return cls(**{k: raw[k] for k in raw
                      if k in cls.__dataclass_fields__})


@dataclass
class RenderJob:
    instance_id: str
    headers: list[str]
    grid: list[list[str]]  # cell text, row-major, header row excluded
    out_path: Path
    style: Style = field(default_factory=Style)

    @property
    def n_rows(self) -> int:
        return len(self.grid)

    @property
    def n_cols(self) -> int:
        return len(self.headers)


def _cell_text(raw) -> str:
    value = raw.get("v")
    return "null" if value is None else str(value)


def job_from_record(record: dict, out_dir: Path, style: Style) -> RenderJob:
    table = record["table"]
    headers = [column["display"] for column in table["columns"]]
    grid = [[_cell_text(cell) for cell in row] for row in table["rows"]]
    instance_id = record["instance_id"]
    return RenderJob(
        instance_id=instance_id,
        headers=headers,
        grid=grid,
        out_path=out_dir / f"{instance_id}.png",
        style=style,
    )


def load_jobs(dataset_path: str | Path, out_dir: str | Path,
              style: Optional[Style] = None) -> list[RenderJob]:
    style = style or Style()
    out_dir = Path(out_dir)
    jobs = []
    with open(dataset_path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                jobs.append(job_from_record(json.loads(line), out_dir, style))
    return jobs


def render_image(job: RenderJob) -> dict:
    """Draw one table image; returns {instance_id, path, sha256, rows, cols}."""
    if job.n_cols == 0:
        raise EmptyTable(f"{job.instance_id}: table has no columns")
    style = job.style
    # canvas scales with the table so wide tables stay legible
    width = max(job.n_cols * style.cell_width, 2.0)
    height = max((job.n_rows + 1) * style.cell_height, 0.8)
    figure, axis = plt.subplots(figsize=(width, height), dpi=style.dpi)
    try:
        axis.set_axis_off()
        table = axis.table(
            cellText=job.grid if job.grid else [[""] * job.n_cols],
            colLabels=job.headers,
            loc="center",
            cellLoc="center",
        )
        table.auto_set_font_size(False)
        table.set_fontsize(style.font_size)
        for (row, _col), cell in table.get_celld().items():
            if row == 0:
                cell.set_facecolor(style.header_color)
                cell.set_text_props(weight="bold")
        figure.subplots_adjust(left=0.01, right=0.99, top=0.99, bottom=0.01)
        job.out_path.parent.mkdir(parents=True, exist_ok=True)
        figure.savefig(
            job.out_path,
            format="png",
            dpi=style.dpi,
            metadata={"Software": None},  # strip version stamp for stable bytes
        )
    finally:
        plt.close(figure)
    digest = hashlib.sha256(job.out_path.read_bytes()).hexdigest()
    return {
        "instance_id": job.instance_id,
        "path": str(job.out_path),
        "sha256": digest,
        "rows": job.n_rows + 1,  # header included, matching the drawn grid
        "cols": job.n_cols,
    }


def run_batch(jobs: list[RenderJob], manifest_path: str | Path,
              processes: int = 1) -> tuple[list[dict], list[dict]]:
    """Render every job; returns (results, failures) and writes the manifest."""
    results = []
    failures = []
    if processes > 1:
        from multiprocessing import Pool

        with Pool(processes) as pool:
            for job, outcome in zip(jobs, pool.map(_safe_render, jobs)):
                (results if "sha256" in outcome else failures).append(outcome)
    else:
        for job in jobs:
            outcome = _safe_render(job)
            (results if "sha256" in outcome else failures).append(outcome)
    manifest = {
        "images": {r["instance_id"]: r["sha256"] for r in results},
        "count": len(results),
        "failures": failures,
    }
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")
    return results, failures


def _safe_render(job: RenderJob) -> dict:
    try:
        return render_image(job)
    except Exception as err:  # keep the batch going; the exit code reports
        return {"instance_id": job.instance_id, "error": str(err)}
