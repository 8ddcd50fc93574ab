"""
Binary CSR container used by persisted models.

Layout (all little-endian): 8-byte magic `XLSPMAT1`, three uint64 values
(rows, columns, stored entries), then int64 row offsets, int64 column
indexes and float64 values.
"""
import struct

import numpy as np
import scipy.sparse as sp

from .exceptions import ModelFormatError

MAGIC = b"XLSPMAT1"
HEADER = struct.Struct("<QQQ")


def canonical(matrix) -> sp.csr_matrix:
    """CSR float64 copy without stored zeros and with sorted indices."""
    matrix = sp.csr_matrix(matrix, dtype=np.float64, copy=True)
    matrix.eliminate_zeros()
    matrix.sort_indices()
    return matrix


def write_matrix(matrix, path) -> None:
    matrix = canonical(matrix)
    rows, cols = matrix.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(HEADER.pack(rows, cols, matrix.nnz))
        f.write(matrix.indptr.astype("<i8").tobytes())
        f.write(matrix.indices.astype("<i8").tobytes())
        f.write(matrix.data.astype("<f8").tobytes())


def read_matrix(path) -> sp.csr_matrix:
    with open(path, "rb") as f:
        payload = f.read()
    if payload[: len(MAGIC)] != MAGIC:
        raise ModelFormatError("{} is not a sparse matrix file".format(path))
    offset = len(MAGIC)
    try:
        rows, cols, nnz = HEADER.unpack_from(payload, offset)
    except struct.error:
        raise ModelFormatError("{} has a truncated header".format(path)) from None
    offset += HEADER.size
    expected = offset + 8 * (rows + 1) + 16 * nnz
    if len(payload) != expected:
        raise ModelFormatError(
            "{} has {} bytes, expected {}".format(path, len(payload), expected)
        )
    indptr = np.frombuffer(payload, dtype="<i8", count=rows + 1, offset=offset)
    offset += 8 * (rows + 1)
    indices = np.frombuffer(payload, dtype="<i8", count=nnz, offset=offset)
    offset += 8 * nnz
    data = np.frombuffer(payload, dtype="<f8", count=nnz, offset=offset)
    return sp.csr_matrix(
        (data.astype(np.float64), indices.astype(np.int64), indptr.astype(np.int64)),
        shape=(rows, cols),
    )


def write_vector(vector, path) -> None:
    """Stores a dense vector as a one-row matrix."""
    write_matrix(np.asarray(vector, dtype=np.float64).reshape(1, -1), path)


def read_vector(path) -> np.ndarray:
    return read_matrix(path).toarray().ravel()
