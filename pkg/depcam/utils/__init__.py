from depcam.utils.logger import FILE_ONLY, FileOnlyFilter, logger, setup_logger, set_debug

__all__ = ["FILE_ONLY", "FileOnlyFilter", "logger", "setup_logger", "set_debug"]
