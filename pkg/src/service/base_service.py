from typing import Optional

from src.utils.logger import Logger
from src.utils.settings import Settings


logger = Logger.setup()


class BaseService:
    """Common base: carries the run settings and the lifecycle hooks."""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or Settings()

    def initialize(self):
        logger.debug(f"{type(self).__name__} initialized")

    def close(self):
        logger.debug(f"{type(self).__name__} closed")
