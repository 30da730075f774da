import asyncio
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Dict, Optional

from src.utils.logger import Logger

logger = Logger.setup()

INDENT = "  "


def _float_text(value: float) -> str:
    if not math.isfinite(value):
        raise ValueError(f"out of range float value {value!r} is not JSON compliant")
    text = format(value, ".17g")
    return text if any(c in text for c in ".e") else text + ".0"


def _encode(value: Any, depth: int) -> str:
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, float):
        return _float_text(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, (list, tuple)):
        items = [_encode(v, depth + 1) for v in value]
    elif isinstance(value, dict):
        items = [
            f"{json.dumps(str(k), ensure_ascii=False)}: {_encode(value[k], depth + 1)}"
            for k in sorted(value, key=str)
        ]
    else:
        raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
    brackets = "[]" if isinstance(value, (list, tuple)) else "{}"
    if not items:
        return brackets
    inner = INDENT * (depth + 1)
    body = (",\n" + inner).join(items)
    return f"{brackets[0]}\n{inner}{body}\n{INDENT * depth}{brackets[1]}"


class JsonRepository:
    """Reads input documents and writes reports as JSON files."""

    def __init__(self, encoding: str = "utf-8"):
        self.encoding = encoding

    @staticmethod
    def dumps(payload: Dict[str, Any]) -> str:
        """Canonical text: sorted keys, floats with 17 significant digits, trailing newline."""
        return _encode(payload, 0) + "\n"

    def _read_sync(self, path: Optional[str]) -> Dict[str, Any]:
        if path is None or path == "-":
            return json.loads(sys.stdin.read())
        return json.loads(Path(path).read_text(encoding=self.encoding))

    def _write_sync(self, path: Optional[str], text: str) -> None:
        if path is None or path == "-":
            sys.stdout.write(text)
            sys.stdout.flush()
            return
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        handle, temp_path = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
        try:
            with os.fdopen(handle, "w", encoding=self.encoding) as stream:
                stream.write(text)
                stream.flush()
                os.fsync(stream.fileno())
            os.replace(temp_path, target)
        except BaseException:
            if os.path.exists(temp_path):
                os.unlink(temp_path)
            raise

    async def read(self, path: Optional[str]) -> Dict[str, Any]:
        """
        Load a JSON document.

        Args:
            path: file path, or None / "-" for stdin

        Returns:
            Parsed document
        """
        try:
            document = await asyncio.to_thread(self._read_sync, path)
            logger.debug(f"Read input from {path or 'stdin'}")
            return document
        except Exception as e:
            logger.error(f"Error reading {path or 'stdin'}: {e}")
            raise

    async def write(self, path: Optional[str], payload: Dict[str, Any]) -> None:
        """
        Write a JSON document atomically (temporary file in the target directory, then rename).

        Args:
            path: file path, or None / "-" for stdout
            payload: JSON-serialisable document
        """
        text = self.dumps(payload)
        try:
            await asyncio.to_thread(self._write_sync, path, text)
            logger.debug(f"Report written to {path or 'stdout'}")
        except Exception as e:
            logger.error(f"Error writing {path or 'stdout'}: {e}")
            raise
