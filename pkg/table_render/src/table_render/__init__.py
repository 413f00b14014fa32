"""Render benchmark table JSONL into deterministic PNGs."""

from .render import (
    EmptyTable,
    RenderError,
    RenderJob,
    Style,
    job_from_record,
    load_jobs,
    render_image,
    run_batch,
)

__all__ = [
    "EmptyTable",
    "RenderError",
    "RenderJob",
    "Style",
    "job_from_record",
    "load_jobs",
    "render_image",
    "run_batch",
]
