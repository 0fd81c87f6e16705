import multiprocessing
import os
from typing import Optional, Tuple

# verbosity thresholds: 0 = silent, 1 = INFO, 2 = DEBUG
LEVELS = {"CRITICAL ERROR": 1, "WARNING": 1, "INFO": 1, "DEBUG": 2}


def log(log_queue, verbosity: int, level: str, message: str) -> None:
    """Puts '[pid] [LEVEL] message' on the queue if verbosity allows it."""
    if log_queue is None or verbosity < LEVELS[level]:
        return
    log_queue.put(f"[{os.getpid()}] [{level}] {message}")


def logger_process(log_queue, log_file_path: str) -> None:
    """
    A dedicated process that listens for messages on a queue and writes them to a log file.
    A None message is the signal to stop.
    """
    try:
        with open(log_file_path, "w", encoding="utf-8") as f:
            while True:
                message = log_queue.get()
                if message is None:
                    break
                f.write(f"{message}\n")
                f.flush()
    except OSError:
        # nothing left to report to once the log file itself fails
        pass


def start_logger(log_file_path: str) -> Tuple[object, multiprocessing.Process, object]:
    """Starts a Manager queue and the logger process draining it into log_file_path."""
    directory = os.path.dirname(os.path.abspath(log_file_path))
    os.makedirs(directory, exist_ok=True)
    manager = multiprocessing.Manager()
    log_queue = manager.Queue()
    logger = multiprocessing.Process(target=logger_process, args=(log_queue, log_file_path))
    logger.start()
    return log_queue, logger, manager


def stop_logger(log_queue, logger: Optional[multiprocessing.Process], manager=None) -> None:
    if log_queue is not None:
        log_queue.put(None)
    if logger is not None:
        logger.join()
    if manager is not None:
        manager.shutdown()
