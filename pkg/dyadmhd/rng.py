"""
Counter-based random streams.

Every ensemble path draws from its own :class:`numpy.random.Philox` stream keyed by ``(master_seed, path_index)``. Batches hold one generator per path in a :class:`PathStreams`, so the noise of a path depends only on the master seed and its index, never on the batch size or the number of worker threads.
"""

from typing import Optional, Sequence, Union

import numpy as np


def path_stream(master_seed: int, index: int) -> np.random.Generator:
    """
    Returns the generator for stream ``index`` of run ``master_seed``.
    """
    if master_seed < 0 or index < 0:
        raise ValueError(
            f"Seeds and stream indices must be non-negative, got {master_seed}, {index}."
        )
    seq = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(seq))


def randomizer(specifier: Optional[Union[int, np.random.Generator]]):
    """
    Outputs a :class:`numpy.random.Generator` based on the input.

    :param specifier: An integer used as the master seed of stream 0, a passed-through :class:`numpy.random.Generator`, or :attr:`None` for a fresh entropy-seeded stream (never used by the verification suite).
    """
    if isinstance(specifier, np.random.Generator):
        return specifier
    elif specifier is None:
        return np.random.Generator(np.random.Philox())
    elif isinstance(specifier, (int, np.integer)) and not isinstance(specifier, bool):
        return path_stream(int(specifier), 0)
    else:
        raise TypeError(
            f"Type {int} (seed) or {np.random.Generator} required, but got {type(specifier)}."
        )


class PathStreams:
    """
    Per-path generators for paths ``start, ..., start + count - 1`` of run ``master_seed``.

    Draws are buffered per path and per kind in blocks of :attr:`BLOCK` values. A path's sequence therefore depends only on its own draw history, and a batch of paths reproduces what each path would see on its own.
    """

    BLOCK = 64

    def __init__(self, master_seed: int, start: int, count: int):
        if count < 1:
            raise ValueError(f"At least one path is required, got {count}.")
        self.start = start
        self._gens = [path_stream(master_seed, start + _k) for _k in range(count)]
        self._buffers = {}

    def __len__(self):
        return len(self._gens)

    def _take(self, kind: str, idx, shape=()) -> np.ndarray:
        n = len(self)
        if kind not in self._buffers:
            self._buffers[kind] = (np.empty((n, self.BLOCK) + shape), np.full(n, self.BLOCK))
        buf, pos = self._buffers[kind]
        idx = np.arange(n) if idx is None else np.asarray(idx, dtype=np.int64)
        for _k in idx[pos[idx] >= self.BLOCK]:
            buf[_k] = getattr(self._gens[_k], kind)(size=(self.BLOCK,) + shape)
            pos[_k] = 0
        out = buf[idx, pos[idx]]
        pos[idx] += 1
        return out

    def normal(self, scale: float, shape: Sequence[int]) -> np.ndarray:
        """
        One ``Normal(0, scale²)`` array of the given shape per path, stacked along the first axis.
        """
        return scale * self._take("standard_normal", None, tuple(shape))

    def standard_exponential(self, idx) -> np.ndarray:
        """
        The next unit exponential of every path in ``idx`` (batch-local indices).
        """
        return self._take("standard_exponential", idx)

    def random(self, idx) -> np.ndarray:
        """
        The next uniform on ``[0, 1)`` of every path in ``idx`` (batch-local indices).
        """
        return self._take("random", idx)
