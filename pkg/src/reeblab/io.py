"""Schema validation, hashing and serialization helpers."""
from __future__ import annotations

import hashlib
import json
from typing import Any

import jsonschema
import numpy as np


class SchemaError(ValueError):
    """Configuration failed validation; ``fields`` lists every offending path."""

    def __init__(self, fields: list[str], messages: list[str]):
        self.fields = fields
        self.messages = messages
        super().__init__("; ".join(f"{f}: {m}" for f, m in zip(fields, messages)))


def validate(instance: Any, schema: dict) -> None:
    """Validate against a JSON schema, collecting all errors rather than the first."""
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(instance), key=lambda e: list(e.absolute_path))
    if errors:
        fields = ["/".join(str(p) for p in e.absolute_path) or "<root>" for e in errors]
        raise SchemaError(fields, [e.message for e in errors])


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    """Deterministic JSON text (sorted keys, no whitespace variation)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)


def content_hash(obj: Any) -> str:
    """Git-style SHA-1 of the canonical JSON encoding."""
    data = canonical_json(obj).encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default)
