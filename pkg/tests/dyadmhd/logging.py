from unittest import TestCase
import logging
import tempfile
from pathlib import Path
import pytest
from dyadmhd import logging as mdl


class TestConfigureLoggingHandler(TestCase):
    def setUp(self):
        self.logger = logging.getLogger("dyadmhd.tests.logging")
        self.logger.setLevel(logging.WARNING)

    def tearDown(self):
        for _handler in list(self.logger.handlers):
            self.logger.removeHandler(_handler)
            _handler.close()

    def test_file_handler(self):
        with tempfile.TemporaryDirectory() as tmpd:
            filename = Path(tmpd) / "log.log"
            handler = mdl.configure_logging_handler(
                level="INFO", filename=filename, name=self.logger.name
            )
            self.assertIsInstance(handler, logging.FileHandler)
            self.assertEqual(self.logger.level, logging.INFO)

            self.logger.debug("hidden message")
            self.logger.info("shown message")
            handler.flush()
            text = filename.read_text()

            self.assertRegex(text, r"(?m)^INFO .*dyadmhd\.tests\.logging:\d+\(MainThread\) shown message")
            self.assertNotIn("hidden message", text)

    def test_console_handler(self):
        handler = mdl.configure_logging_handler(level="DEBUG", name=self.logger.name)
        self.assertIsInstance(handler, logging.StreamHandler)
        self.assertEqual(handler.level, logging.DEBUG)

    def test_invalid_level(self):
        with self.assertRaises(ValueError):
            mdl.configure_logging_handler(level="LOUD", name=self.logger.name)

    def test_replaces_own_handler(self):
        first = mdl.configure_logging_handler(level="INFO", name=self.logger.name)
        second = mdl.configure_logging_handler(level="DEBUG", name=self.logger.name)
        self.assertNotIn(first, self.logger.handlers)
        self.assertEqual(self.logger.handlers, [second])


class TestLogTime(TestCase):
    @pytest.fixture(autouse=True)
    def inject_fixtures(self, caplog):
        self._caplog = caplog

    def test_log_time(self):
        logger = logging.getLogger("dyadmhd.tests.log_time")
        with self._caplog.at_level(logging.INFO):
            with mdl.log_time("forward solve", logger) as watch:
                pass
        messages = [_r.getMessage() for _r in self._caplog.records]
        self.assertIn("started forward solve", messages)
        self.assertRegex(messages[-1], r"^finished forward solve in \d+\.\d{3}s$")
        self.assertGreaterEqual(watch.elapsed, 0.0)

    def test_log_time_on_error(self):
        logger = logging.getLogger("dyadmhd.tests.log_time")
        with self._caplog.at_level(logging.INFO):
            with self.assertRaises(RuntimeError):
                with mdl.log_time("criterion", logger):
                    raise RuntimeError("boom")
        self.assertTrue(self._caplog.records[-1].getMessage().startswith("finished criterion in "))
