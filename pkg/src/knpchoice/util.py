"""Deterministic random streams and the CSV data format.

Every source of randomness in the package draws from a named substream of one
user-facing seed, built on numpy's SeedSequence spawn keys.  Streams are
addressed by integer paths, e.g. (seed, STREAM_RESTART, 3) is restart 3 of a
fit.  Results are therefore reproducible across runs and independent of
worker count or evaluation order.
"""

import csv

import numpy as np

from .errors import ValidationError

# Substream tags.  Never renumber: stored seeds would silently change meaning.
STREAM_RESTART = 1
STREAM_CV_FOLDS = 2
STREAM_CV_FIT = 3
STREAM_BOOT_INDEX = 4
STREAM_BOOT_FIT = 5
STREAM_SIM_TRAIN = 6
STREAM_SIM_TEST = 7
STREAM_SIM_FIT = 8

_ENTROPY_MASK = (1 << 63) - 1


def rng_stream(seed, *path):
    """Generator for the substream addressed by (seed, *path)."""
    entropy = int(seed) & _ENTROPY_MASK
    key = tuple(int(p) & _ENTROPY_MASK for p in path)
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=key))


def data_header(d_w):
    return ["y", "v"] + [f"w{j}" for j in range(1, d_w + 1)]


def write_data_csv(path, y, v, w):
    """Write observations in the package data format: header y,v,w1..wd."""
    y = np.asarray(y)
    v = np.asarray(v)
    w = np.atleast_2d(np.asarray(w))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(data_header(w.shape[1]))
        for i in range(y.shape[0]):
            writer.writerow(
                [repr(int(y[i])), repr(float(v[i]))] + [repr(float(x)) for x in w[i]]
            )


def read_data_csv(path):
    """Read (y, v, w) from the package data format.

    Raises ValidationError naming the offending line on malformed input.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        d_w = len(header) - 2
        if d_w < 1 or header != data_header(d_w):
            raise ValidationError(
                f"{path}: header must be y,v,w1,...,wd; got {','.join(header)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d_w + 2:
                raise ValidationError(
                    f"{path}:{lineno}: expected {d_w + 2} fields, got {len(row)}"
                )
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric field") from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=np.float64)
    return arr[:, 0], arr[:, 1], arr[:, 2:]
