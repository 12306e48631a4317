"""Landscape sweeps: sketch size vs. decoded quality, decoder comparison,
and frequency scale vs. task success."""

from .cells import PLANNERS, cell_key, rerun_record, run_cell, sketch_size
from .presets import preset_config
from .runner import read_records, records_path, report, resolve_workers, run_experiment, summarize, write_summary

__all__ = [
    "PLANNERS",
    "cell_key",
    "preset_config",
    "read_records",
    "records_path",
    "report",
    "rerun_record",
    "resolve_workers",
    "run_cell",
    "run_experiment",
    "sketch_size",
    "summarize",
    "write_summary",
]
