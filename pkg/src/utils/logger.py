from loguru import logger
from datetime import datetime
import pytz
import sys
import os


class Logger:
    @staticmethod
    def setup():
        logger.remove()

        zone = pytz.timezone(os.getenv("HILBUND_LOG_TZ", "UTC"))

        def local_time(record):
            record["extra"]["local_time"] = datetime.now(zone).strftime("%Y-%m-%d %H:%M:%S")

        # stdout may carry a report, so the console sink goes to stderr
        logger.add(
            sys.stderr,
            format="<green>{time}</green> | <level>{level}</level> | <cyan>{function}</cyan> - <level>{message}</level> | {extra[local_time]}",
            colorize=True,
            level=os.getenv("HILBUND_LOG_LEVEL", "INFO"),
        )

        log_dir = os.getenv("HILBUND_LOG_DIR", "src/logs")
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)

            # daily rotation
            logger.add(
                os.path.join(log_dir, "hilbund.log"),
                rotation="00:00",
                retention="7 days",
                compression="zip",
                encoding="utf-8",
                level="DEBUG",
            )

        return logger.patch(local_time)
