import queue

from run_logging import log, logger_process, start_logger, stop_logger


def test_log_respects_verbosity(log_queue):
    log(log_queue, 0, "INFO", "silent")
    log(log_queue, 1, "DEBUG", "hidden")
    log(log_queue, 1, "INFO", "shown")
    log(log_queue, 2, "DEBUG", "detail")
    log(None, 2, "INFO", "nowhere")
    assert len(log_queue.messages) == 2
    assert log_queue.messages[0].endswith("[INFO] shown")
    assert log_queue.messages[1].endswith("[DEBUG] detail")


def test_logger_process_drains_until_sentinel(tmp_path):
    q = queue.Queue()
    for message in ("first", "second", None, "after"):
        q.put(message)
    path = tmp_path / "log.txt"
    logger_process(q, str(path))
    assert path.read_text(encoding="utf-8") == "first\nsecond\n"


def test_start_and_stop_logger(tmp_path):
    path = tmp_path / "nested" / "run.log"
    log_queue, logger, manager = start_logger(str(path))
    log(log_queue, 1, "WARNING", "careful")
    stop_logger(log_queue, logger, manager)
    assert not logger.is_alive()
    assert "[WARNING] careful" in path.read_text(encoding="utf-8")
