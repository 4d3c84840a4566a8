"""Instance and signing files.

An instance file has one column vector per line (m comma-separated floats)
and may start with a ``# m=<m> n=<n>`` header.
"""
from __future__ import annotations

import re

import numpy as np

from .core import Signing, VectorSet
from .errors import DimensionError, ValidationError

_HEADER = re.compile(r"#\s*m\s*=\s*(\d+)\s+n\s*=\s*(\d+)\s*$")


def read_instance(path) -> VectorSet:
    declared = None
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                hit = _HEADER.match(text)
                if hit:
                    declared = (int(hit.group(1)), int(hit.group(2)))
                continue
            try:
                rows.append([float(tok) for tok in text.split(",")])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DimensionError(f"{path}: no vectors")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DimensionError(f"{path}: lines have differing lengths {sorted(widths)}")
    X = VectorSet(np.array(rows).T)
    if declared is not None and declared != (X.dim, X.count):
        raise DimensionError(f"{path}: header says m={declared[0]} n={declared[1]}, found m={X.dim} n={X.count}")
    return X


def write_instance(path, X: VectorSet, header: bool = True):
    with open(path, "w") as fh:
        if header:
            fh.write(f"# m={X.dim} n={X.count}\n")
        for col in X.data.T:
            fh.write(",".join("%.17g" % v for v in col) + "\n")


def read_signing(path) -> Signing:
    with open(path) as fh:
        return Signing.from_string(fh.read())


def write_signing(path, sigma: Signing):
    with open(path, "w") as fh:
        fh.write(str(sigma) + "\n")
