"""Deterministic, counter-based random streams for parallel Monte-Carlo.

Every trial owns a :class:`RngStream` keyed by ``(master_seed, stream_id)``.
The bit generator is Philox4x64, so a stream can be re-created for trial
``i`` without touching trials ``0..i-1``, and the output depends only on
the key, never on which worker thread draws it.
"""

import zlib
from numbers import Integral

import numpy as np

from .exceptions import ConfigurationError

_MASK64 = (1 << 64) - 1


def _encode_label(label):
    # Tag by type so that child("1") and child(1) land on different keys.
    if isinstance(label, bool):
        raise ConfigurationError("stream labels must be str or int, not bool")
    if isinstance(label, Integral):
        if label < 0:
            raise ConfigurationError(f"integer stream labels must be >= 0, got {label}")
        return [1, int(label) & _MASK64, int(label) >> 64]
    if isinstance(label, str):
        raw = label.encode("utf-8")
        return [2, len(raw), zlib.crc32(raw), int.from_bytes(raw[:16].ljust(16, b"\0"), "little")]
    raise ConfigurationError(f"stream labels must be str or int, got {type(label).__name__}")


def _key_for(master_seed, stream_id, path):
    entropy = [int(master_seed) & _MASK64, int(stream_id) & _MASK64]
    for label in path:
        entropy.extend(_encode_label(label))
    return np.random.SeedSequence(entropy).generate_state(2, np.uint64)


class RngStream:
    """One independent random stream.

    Parameters
    ----------
    master_seed : int
        Seed of the whole run (64-bit).
    stream_id : int
        Trial index.  Distinct ids give statistically independent streams.
    path : tuple of (str | int)
        Sub-stream labels, extended by :meth:`child`.

    The wrapped :class:`numpy.random.Generator` is available as
    :attr:`generator`; a stream must be used by one thread at a time.
    """

    __slots__ = ("master_seed", "stream_id", "path", "_bitgen", "generator")

    def __init__(self, master_seed, stream_id=0, path=()):
        for value, name in ((master_seed, "master_seed"), (stream_id, "stream_id")):
            if isinstance(value, bool) or not isinstance(value, Integral) or not 0 <= value <= _MASK64:
                raise ConfigurationError(f"{name} must be a 64-bit non-negative integer, got {value!r}")
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self.path = tuple(path)
        self._bitgen = np.random.Philox(key=_key_for(self.master_seed, self.stream_id, self.path))
        self.generator = np.random.Generator(self._bitgen)

    @property
    def counter(self):
        """Current Philox block counter (advances as numbers are drawn)."""
        return int(self._bitgen.state["state"]["counter"][0])

    def child(self, *labels):
        """Independent sub-stream, e.g. ``rng.child("W", 2)`` for layer 2 weights."""
        return RngStream(self.master_seed, self.stream_id, self.path + labels)

    def trial(self, stream_id):
        """Stream for trial ``stream_id`` under the same master seed and path."""
        return RngStream(self.master_seed, stream_id, self.path)

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id}, path={self.path!r})"


def derive_seed(master_seed, *labels):
    """Deterministic 63-bit seed for a named sub-run of an experiment."""
    key = _key_for(master_seed, 0, labels)
    return int(key[0]) >> 1
