from .logging_config import LogContext, clear_run_context, configure_logging, get_logger

__all__ = ["LogContext", "clear_run_context", "configure_logging", "get_logger"]
