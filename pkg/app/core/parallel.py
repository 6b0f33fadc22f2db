import numba
from app.core.config import settings
from app.core.logging import logger


def configure_threads(limit: int = None) -> int:
    """Cap numba worker threads from the argument or CANTOR2W_THREADS"""
    cap = limit if limit is not None else settings.CANTOR2W_THREADS
    if cap is None:
        return numba.get_num_threads()
    threads = max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(threads)
    logger.debug(f"numba threads capped at {threads}")
    return threads
