from datetime import datetime
from enum import Enum
from typing import Any, Dict, Optional

import pytz
from pydantic import BaseModel, Field

SCHEMA_VERSION = "1"
TOOL_VERSION = "1.0.0"


class CommandName(str, Enum):
    MVEE = "mvee"
    JOHN = "john"
    RENORM_BUILD = "renorm-build"
    RENORM_VERIFY = "renorm-verify"
    RENORM_SELECT = "renorm-select"
    HYPER_BUILD = "hyper-build"
    HYPER_ROUNDTRIP = "hyper-roundtrip"
    HYPER_SLICE = "hyper-slice"


class Command(BaseModel):
    name: CommandName
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    overrides: Dict[str, Any] = Field(default_factory=dict)


class Timings(BaseModel):
    """Wall-clock data; excluded from determinism comparisons."""

    elapsed_seconds: float = 0.0
    generated_at: str = Field(default_factory=lambda: datetime.now(pytz.utc).isoformat())
    tool_version: str = TOOL_VERSION


class Report(BaseModel):
    schema_version: str = SCHEMA_VERSION
    command: CommandName
    config: Dict[str, Any] = Field(default_factory=dict)
    status: str = "ok"
    results: Dict[str, Any] = Field(default_factory=dict)
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    timings: Timings = Field(default_factory=Timings)

    def hashed_payload(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", exclude={"timings"})
