"""Small file helpers: atomic writes and Matrix Market export."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp


def _atomic_replace(path: Path, write) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    _atomic_replace(Path(path), lambda fh: fh.write(text.encode()))


def write_mtx(path, matrix, comment: str = "") -> None:
    """Write a matrix in Matrix Market coordinate format with 17 significant digits."""
    mat = sp.coo_matrix(matrix)

    def write(fh):
        scipy.io.mmwrite(fh, mat, comment=comment, field="real", precision=17, symmetry="general")

    _atomic_replace(Path(path), write)


def read_mtx(path) -> sp.csr_matrix:
    return sp.csr_matrix(scipy.io.mmread(str(path)))


def format_real(x: float) -> str:
    return f"{float(x):.17g}"


def write_partition(path, interior: np.ndarray, boundary: np.ndarray) -> None:
    lines = ["INTERIOR " + " ".join(str(int(i)) for i in interior)]
    lines.append("BOUNDARY " + " ".join(str(int(i)) for i in boundary))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_partition(path) -> tuple[np.ndarray, np.ndarray]:
    parts = {}
    with open(path) as fh:
        for line in fh:
            tokens = line.split()
            if tokens:
                parts[tokens[0]] = np.array([int(t) for t in tokens[1:]], dtype=np.int64)
    return parts["INTERIOR"], parts["BOUNDARY"]
