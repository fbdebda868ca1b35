"""Model documents, the coefficient expression language and the qvi command."""

from .expr import Expr, parse_expr, eval_expr, to_text
from .config import RunConfig, PicardOptions, MCOptions, parse_config, load_config
from .output import write_frame, write_summary, write_report
from .main import build_parser, run, main

__all__ = [
    "Expr",
    "parse_expr",
    "eval_expr",
    "to_text",
    "RunConfig",
    "PicardOptions",
    "MCOptions",
    "parse_config",
    "load_config",
    "write_frame",
    "write_summary",
    "write_report",
    "build_parser",
    "run",
    "main",
]
