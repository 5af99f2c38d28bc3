import logging
from rich.logging import RichHandler
from rich.console import Console

logging.getLogger('matplotlib').setLevel(logging.ERROR)
logging.getLogger('PIL').setLevel(logging.ERROR)


def setup_logger(logger_name: str = None, level: int = logging.INFO) -> logging.Logger:
    if logger_name is None:
        logger_name = __name__

    # Configure rich logger
    console = Console(stderr=True)
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=False)]
    )
    logger = logging.getLogger(logger_name)
    return logger


def set_verbosity(verbose: bool = False, quiet: bool = False) -> None:
    """
    Adjust the root level after setup; quiet wins over verbose.
    """
    if quiet:
        logging.getLogger().setLevel(logging.WARNING)
    elif verbose:
        logging.getLogger().setLevel(logging.DEBUG)
