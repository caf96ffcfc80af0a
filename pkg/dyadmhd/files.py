import io
import threading
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from dyadmhd import __version__


def artifact_comment(config_hash: str, master_seed: int) -> str:
    """
    The comment line heading every CSV artifact.
    """
    return f"# dyadmhd {__version__} config_sha256={config_hash} master_seed={master_seed}\n"


class ThreadSafeWriter:
    """
    Text file shared by worker threads. Every call holds the lock for one open-write-close cycle, so concurrent appends never interleave within a call.
    """

    _MISSING = object()

    def __init__(self, filename: Union[str, Path]):
        self.filename = Path(filename)
        self.lock = threading.Lock()

    def _open(self, mode):
        return open(self.filename, mode, encoding="utf-8", newline="\n")

    def append(self, text: str):
        with self.lock, self._open("at") as fo:
            fo.write(text)

    def truncate(self, text: str = ""):
        """
        Replaces the file contents with ``text``.
        """
        with self.lock, self._open("wt") as fo:
            fo.write(text)

    def read(self, default=_MISSING) -> str:
        """
        Returns the file contents, or ``default`` if given and the file does not exist.
        """
        with self.lock:
            try:
                with self._open("rt") as fo:
                    return fo.read()
            except FileNotFoundError:
                if default is self._MISSING:
                    raise
                return default


class CsvWriter(ThreadSafeWriter):
    """
    Numeric CSV artifact with a fixed column order. Creating the writer truncates the file and writes the comment line and the header row.

    Values are written with ``%.17g`` so identical arrays always produce identical bytes.
    """

    def __init__(self, filename, columns: Sequence[str], comment: str):
        super().__init__(filename)
        self.columns = list(columns)
        self.truncate(comment + ",".join(self.columns) + "\n")

    def write_rows(self, rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.size == 0:
            return
        if rows.shape[1] != len(self.columns):
            raise ValueError(
                f"Expected {len(self.columns)} columns but got {rows.shape[1]}."
            )
        buffer = io.StringIO()
        np.savetxt(buffer, rows, delimiter=",", fmt="%.17g")
        self.append(buffer.getvalue())
