import sys

from dotenv import load_dotenv

from src.cli import run
from src.utils.logger import Logger

load_dotenv()

logger = Logger.setup()


if __name__ == "__main__":
    logger.debug("Starting hilbund")
    sys.exit(run())
