import io
import json
import logging

from core.errors import NoFeatures
from core.logger import emit_error_line, get_logger, log_error, setup_logging


def test_error_line_is_one_sorted_json_object():
    buf = io.StringIO()
    emit_error_line("InputMissing", "no such file: a.csv", stream=buf)
    line = buf.getvalue()
    assert line.endswith("\n") and line.count("\n") == 1
    assert json.loads(line) == {"error": "InputMissing", "message": "no such file: a.csv"}
    assert line.index('"error"') < line.index('"message"')


def test_detector_errors_log_their_code_without_traceback(caplog):
    logger = get_logger("test")
    with caplog.at_level(logging.ERROR):
        log_error(logger, "train failed", exc=NoFeatures("dataset is empty"))
    record = caplog.records[-1]
    assert "[NoFeatures] dataset is empty" in record.getMessage()
    assert record.exc_info is None


def test_setup_logging_writes_to_given_stream():
    buf = io.StringIO()
    setup_logging("DEBUG", stream=buf)
    get_logger("test").debug("rows loaded")
    assert "rows loaded" in buf.getvalue()
    assert logging.getLogger("urllib3").level == logging.WARNING
