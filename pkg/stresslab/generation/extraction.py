"""
Tolerant extraction of the first JSON object from free-form model output.
"""
from __future__ import annotations

import json
from typing import Any

from stresslab.core.errors import ExtractionError

_decoder = json.JSONDecoder()


def extract_first_json(raw: str) -> dict[str, Any]:
    """
    Return the earliest `{...}` span that parses as a JSON object.

    Leading prose, trailing prose and code fences are ignored. Spans that fail
    to parse are skipped and the scan resumes at the next brace.
    """
    if not isinstance(raw, str):
        raise ExtractionError(f"expected text, got {type(raw).__name__}")
    start = raw.find("{")
    while start != -1:
        try:
            obj, _ = _decoder.raw_decode(raw, start)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict):
            return obj
        start = raw.find("{", start + 1)
    raise ExtractionError("no valid JSON object found in model output")
