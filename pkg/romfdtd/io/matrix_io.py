"""
Coordinate-list text dump of system matrices, for inspection with external
tools. Format:

    # shape: ROWS COLS
    row col value
    ...
"""
import warnings
from pathlib import Path
from typing import Union

import numpy as np
import scipy.sparse as sp

from romfdtd.errors import RecordIOError


def dump_coo(matrix, path: Union[str, Path]) -> None:
    """Write the nonzeros of a sparse or dense matrix."""
    coo = sp.coo_matrix(matrix)
    data = np.column_stack([coo.row, coo.col, coo.data]) if coo.nnz else np.zeros((0, 3))
    try:
        np.savetxt(
            path,
            data,
            fmt=["%d", "%d", "%.17g"],
            header=f"# shape: {coo.shape[0]} {coo.shape[1]}",
            comments="",
        )
    except OSError as exc:
        raise RecordIOError(f"cannot write {path}: {exc}") from exc


def load_coo(path: Union[str, Path]) -> sp.csr_matrix:
    try:
        with open(path, encoding="utf-8") as handle:
            header = handle.readline().split()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)  # header-only files
                data = np.loadtxt(handle, ndmin=2)
    except (OSError, ValueError) as exc:
        raise RecordIOError(f"cannot read {path}: {exc}") from exc
    if header[:2] != ["#", "shape:"] or len(header) != 4:
        raise RecordIOError(f"{path}: missing shape header")
    shape = (int(header[2]), int(header[3]))
    if data.size == 0:
        return sp.csr_matrix(shape)
    rows, cols = data[:, 0].astype(int), data[:, 1].astype(int)
    return sp.csr_matrix((data[:, 2], (rows, cols)), shape=shape)
