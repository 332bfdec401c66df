"""Key-value config files for dataset schemas and experiments.

Format: one ``key = value`` pair per line, ``#`` starts a comment, blank
lines ignored. List-valued keys are comma-separated. The same file format
carries both the dataset schema (``target``, ``protected``, ``privileged``,
optional ``drop``) and, for experiments, the run plan (``data``, ``models``,
``runs``, ``train_ratio``, ``seed``, ``metrics``, ``out`` plus boosting
hyperparameters).
"""
from __future__ import annotations

from .dataset import DatasetSchema
from .errors import SchemaError


def parse_kv_file(path) -> dict:
    out = {}
    with open(path, encoding="utf-8-sig") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def split_list(value: str) -> list:
    return [v.strip() for v in value.split(",") if v.strip()]


def schema_from_mapping(kv: dict) -> DatasetSchema:
    if "target" not in kv:
        raise SchemaError("config is missing the 'target' key")
    if "protected" not in kv:
        raise SchemaError("config is missing the 'protected' key")
    if "privileged" not in kv:
        raise SchemaError("config is missing the 'privileged' key")
    return DatasetSchema(
        target_column=kv["target"],
        protected_columns=tuple(split_list(kv["protected"])),
        privileged_values=tuple(split_list(kv["privileged"])),
        drop_columns=tuple(split_list(kv.get("drop", ""))),
    )


def load_schema(path) -> DatasetSchema:
    return schema_from_mapping(parse_kv_file(path))


def write_kv_file(path, mapping: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in mapping.items():
            if isinstance(value, (list, tuple)):
                value = ", ".join(str(v) for v in value)
            fh.write(f"{key} = {value}\n")
