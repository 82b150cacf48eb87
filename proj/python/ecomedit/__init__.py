"""Python bindings for the ecomedit C++ core."""

from ._core import (
    CommandResult,
    ConfigError,
    EcomeditError,
    Edit,
    ToyModel,
    build_benchmark,
    edit_eval,
    edit_prompt,
    fnv1a64,
    init_model,
    read_benchmark,
    render_prompt,
    report,
    stats_table,
    template_names,
    template_text,
    write_report,
)

__all__ = [
    "CommandResult",
    "ConfigError",
    "EcomeditError",
    "Edit",
    "ToyModel",
    "build_benchmark",
    "edit_eval",
    "edit_prompt",
    "fnv1a64",
    "init_model",
    "read_benchmark",
    "render_prompt",
    "report",
    "stats_table",
    "template_names",
    "template_text",
    "write_report",
]
