"""CSV, summary and report writers."""

import logging
from pathlib import Path
from typing import Dict, List, Union

import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
SUMMARY_SUFFIX = "_summary.txt"


def write_frame(frame: pd.DataFrame, out_dir: Union[str, Path], name: str) -> Path:
    """Write a DataFrame as ``<name>.csv`` at 17 significant digits."""
    path = Path(out_dir) / f"{name}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug("wrote %s rows=%d", path, len(frame))
    return path


def _format(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_summary(out_dir: Union[str, Path], command: str, values: Dict[str, object]) -> Path:
    """Write ``<command>_summary.txt`` as ``key = value`` lines."""
    path = Path(out_dir) / f"{command}{SUMMARY_SUFFIX}"
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key} = {_format(value)}" for key, value in values.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_summary_text(out_dir: Union[str, Path], command: str, text: str) -> Path:
    """Write pre-formatted ``key = value`` text as ``<command>_summary.txt``."""
    path = Path(out_dir) / f"{command}{SUMMARY_SUFFIX}"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    return path


def write_report(out_dir: Union[str, Path]) -> Path:
    """Concatenate every summary in ``out_dir`` into ``report.txt``, prefixing keys by command."""
    out = Path(out_dir)
    summaries: List[Path] = sorted(out.glob(f"*{SUMMARY_SUFFIX}"))
    if not summaries:
        raise FileNotFoundError(f"no summaries in {out}")
    lines = []
    for path in summaries:
        command = path.name[: -len(SUMMARY_SUFFIX)]
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                lines.append(f"{command}.{line}")
    report = out / "report.txt"
    report.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return report
