"""
Scenario documents.

A scenario is a JSON object with sections `grid`, `materials`, `regions`,
`sources`, `probes` and `run`. Every failure is reported as a
ScenarioParseError with one of the diagnostic codes below; nothing else
escapes the parser.
"""
import json
from pathlib import Path
from typing import Union

from pydantic import ValidationError

from romfdtd.errors import ScenarioParseError
from romfdtd.models.scenario import Scenario
from romfdtd.monitoring import get_logger

logger = get_logger(__name__)

E_SYNTAX = "E_SYNTAX"
E_UNKNOWN_KEY = "E_UNKNOWN_KEY"
E_MISSING_FIELD = "E_MISSING_FIELD"
E_INVALID_VALUE = "E_INVALID_VALUE"
E_INVARIANT = "E_INVARIANT"

_ERROR_CODES = {
    "extra_forbidden": E_UNKNOWN_KEY,
    "missing": E_MISSING_FIELD,
    "union_tag_not_found": E_MISSING_FIELD,
    "invariant": E_INVARIANT,
}


def _diagnostic(exc: ValidationError) -> ScenarioParseError:
    errors = exc.errors()
    first = errors[0]
    code = _ERROR_CODES.get(first["type"], E_INVALID_VALUE)
    location = ".".join(str(part) for part in first["loc"]) or "<document>"
    message = first["msg"]
    if len(errors) > 1:
        message += f" (+{len(errors) - 1} more)"
    return ScenarioParseError(code, message, location=location)


def parse_scenario(text: Union[str, bytes]) -> Scenario:
    """
    Validate a scenario document.

    Args:
        text: UTF-8 JSON document (str or bytes)

    Returns:
        Scenario with defaults applied

    Raises:
        ScenarioParseError: E_SYNTAX with line/column for malformed text,
            otherwise the code of the first schema violation
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ScenarioParseError(E_SYNTAX, f"document is not UTF-8: {exc.reason}") from exc
    if not isinstance(text, str):
        raise ScenarioParseError(E_SYNTAX, f"expected text, got {type(text).__name__}")

    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(E_SYNTAX, exc.msg, line=exc.lineno, column=exc.colno) from exc
    except RecursionError as exc:
        raise ScenarioParseError(E_SYNTAX, "document nests too deeply") from exc

    if not isinstance(data, dict):
        raise ScenarioParseError(
            E_INVALID_VALUE, "top level must be an object", location="<document>"
        )

    try:
        scenario = Scenario.model_validate(data)
    except ValidationError as exc:
        raise _diagnostic(exc) from exc
    except RecursionError as exc:
        raise ScenarioParseError(E_INVALID_VALUE, "document nests too deeply") from exc

    logger.debug(
        "Scenario parsed",
        name=scenario.name,
        regions=len(scenario.regions),
        sources=len(scenario.sources),
        probes=len(scenario.probes),
    )
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read and parse a scenario file (OSError propagates)."""
    return parse_scenario(Path(path).read_bytes())


def serialize_scenario(scenario: Scenario) -> str:
    """Canonical JSON text; parse_scenario(serialize_scenario(s)) == s."""
    return scenario.model_dump_json(indent=2)
