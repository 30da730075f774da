import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

from src.model.geometry import MveeConfig

load_dotenv()


class Settings(BaseModel):
    """Run configuration. Precedence: defaults < environment < config file < flags."""

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(default=1e-6, gt=0, le=0.1)
    oracle_tol: float = Field(default=1e-8, gt=0)
    max_iter: Optional[int] = Field(default=None, gt=0)
    max_rounds: int = Field(default=100, gt=0)
    tol: float = Field(default=1e-2, gt=0)
    seed: int = 0
    cap: int = Field(default=10**6, gt=0)
    threads: int = Field(default=1, ge=1)
    svg: Optional[str] = None

    def mvee_config(self) -> MveeConfig:
        return MveeConfig(
            epsilon=self.epsilon,
            oracle_tol=min(self.oracle_tol, self.epsilon),
            max_iter=self.max_iter,
            max_rounds=self.max_rounds,
        )

    @classmethod
    def from_env(cls) -> Dict[str, Any]:
        values: Dict[str, Any] = {}
        threads = os.getenv("HILBUND_THREADS")
        if threads:
            values["threads"] = int(threads)
        return values

    @classmethod
    def load(
        cls,
        config_path: Optional[str] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ) -> "Settings":
        values = cls.from_env()
        if config_path:
            values.update(json.loads(Path(config_path).read_text(encoding="utf-8")))
        return cls(**values).override(overrides or {})

    def override(self, values: Dict[str, Any]) -> "Settings":
        """Copy with the non-null entries of `values` applied and re-validated."""
        updates = {k: v for k, v in values.items() if v is not None}
        if not updates:
            return self
        return type(self)(**{**self.model_dump(), **updates})
