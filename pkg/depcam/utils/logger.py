import logging
from datetime import datetime
from depcam.config import settings


# extra= for records that already reach the user another way
FILE_ONLY = {"file_only": True}


class FileOnlyFilter(logging.Filter):
    """Keeps records logged with extra={"file_only": True} off the console."""

    def filter(self, record: logging.LogRecord) -> bool:
        return not getattr(record, "file_only", False)


def setup_logger(name: str = "depcam") -> logging.Logger:
    logger = logging.getLogger(name)

    if logger.handlers:
        return logger

    logger.setLevel(logging.DEBUG if settings.debug else logging.INFO)

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    if settings.ensure_directories():
        log_file = settings.logs_dir / f"{datetime.now().strftime('%Y%m%d')}.log"
        try:
            file_handler = logging.FileHandler(log_file)
        except OSError:
            file_handler = None
        if file_handler is not None:
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.WARNING)
    console_handler.setFormatter(formatter)
    console_handler.addFilter(FileOnlyFilter())
    logger.addHandler(console_handler)

    return logger


def set_debug(enabled: bool = True) -> None:
    settings.debug = enabled
    logger.setLevel(logging.DEBUG if enabled else logging.INFO)


logger = setup_logger()
