"""CSV panel format.

Header row, then one row per period in ascending ``t`` with no gaps::

    t, y                      (or y_1..y_m for vector outcomes)
    k<id>_kind                gaussian | student_t | mv_gaussian
    k<id>_mean, k<id>_var     univariate; for student_t these are location and scale^2
    k<id>_dof                 only for models with a student_t row
    k<id>_mean_i, k<id>_cov_i_j (i <= j)   multivariate

Numbers are written in shortest round-trip form.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .density import DensityError, Gaussian, MvGaussian, StudentT
from .panel import ForecastPanel

KINDS = ("gaussian", "student_t", "mv_gaussian")


class CsvFormatError(ValueError):
    pass


def fmt(x) -> str:
    """Shortest round-trip representation of a float (integers stay integral)."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _model_columns(name: str, m: int, has_dof: bool) -> list:
    cols = [f"k{name}_kind"]
    if m == 1:
        cols += [f"k{name}_mean", f"k{name}_var"]
        if has_dof:
            cols.append(f"k{name}_dof")
    else:
        cols += [f"k{name}_mean_{i + 1}" for i in range(m)]
        cols += [f"k{name}_cov_{i + 1}_{j + 1}" for i in range(m) for j in range(i, m)]
    return cols


def save_panel_csv(panel: ForecastPanel, path) -> None:
    y = panel.y
    m = 1 if y.ndim == 1 else y.shape[1]
    names = [str(n) for n in panel.model_names]
    has_dof = [any(isinstance(row[k], StudentT) for row in panel.densities) for k in range(panel.K)]
    header = ["t"] + (["y"] if m == 1 else [f"y_{i + 1}" for i in range(m)])
    for name, dof in zip(names, has_dof):
        header += _model_columns(name, m, dof)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, row in enumerate(panel.densities):
            out = [fmt(t)] + ([fmt(y[t])] if m == 1 else [fmt(v) for v in y[t]])
            for k, d in enumerate(row):
                if isinstance(d, Gaussian):
                    out += ["gaussian", fmt(d.mean), fmt(d.variance)] + ([""] if has_dof[k] else [])
                elif isinstance(d, StudentT):
                    out += ["student_t", fmt(d.location), fmt(d.scale**2), fmt(d.dof)]
                elif isinstance(d, MvGaussian) and m > 1:
                    out += ["mv_gaussian"] + [fmt(v) for v in d.mean]
                    out += [fmt(d.covariance[i, j]) for i in range(m) for j in range(i, m)]
                else:
                    raise CsvFormatError(f"density ({t}, {k}) of type {type(d).__name__} cannot be written")
            w.writerow(out)


def _num(cell: str, row: int, col: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise CsvFormatError(f"row {row}, column {col}: not a number: {cell!r}") from None
    if not math.isfinite(v):
        raise CsvFormatError(f"row {row}, column {col}: non-finite value")
    return v


def load_panel_csv(path) -> ForecastPanel:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    header = rows[0]
    col = {name: i for i, name in enumerate(header)}
    if len(col) != len(header):
        raise CsvFormatError(f"{path}: duplicate column names")
    if "t" not in col:
        raise CsvFormatError(f"{path}: missing column 't'")
    if "y" in col:
        ycols = ["y"]
    else:
        ycols = []
        while f"y_{len(ycols) + 1}" in col:
            ycols.append(f"y_{len(ycols) + 1}")
        if not ycols:
            raise CsvFormatError(f"{path}: missing column 'y'")
    m = len(ycols)
    names = [h[1 : -len("_kind")] for h in header if h.startswith("k") and h.endswith("_kind")]
    if not names:
        raise CsvFormatError(f"{path}: no model columns")
    expected = {"t", *ycols}
    for name in names:
        need = _model_columns(name, m, f"k{name}_dof" in col)
        for c in need:
            if c not in col:
                raise CsvFormatError(f"{path}: missing column {c!r}")
        expected.update(need)
    extra = [h for h in header if h not in expected]
    if extra:
        raise CsvFormatError(f"{path}: unexpected columns {extra}")

    ys, dens = [], []
    for r, cells in enumerate(rows[1:], start=1):
        if len(cells) != len(header):
            raise CsvFormatError(f"row {r}: {len(cells)} cells, header has {len(header)}")
        get = lambda c: cells[col[c]]
        try:
            t = int(get("t"))
        except ValueError:
            raise CsvFormatError(f"row {r}, column t: not an integer: {get('t')!r}") from None
        if t != r - 1:
            raise CsvFormatError(f"row {r}, column t: expected {r - 1}, got {t}")
        ys.append([_num(get(c), r, c) for c in ycols])
        drow = []
        for name in names:
            kind = get(f"k{name}_kind")
            if kind not in KINDS:
                raise CsvFormatError(f"row {r}, column k{name}_kind: unknown kind {kind!r}")
            if (kind == "mv_gaussian") != (m > 1):
                raise CsvFormatError(f"row {r}, column k{name}_kind: {kind} does not match outcome dimension {m}")
            try:
                if m == 1:
                    mean = _num(get(f"k{name}_mean"), r, f"k{name}_mean")
                    vc = f"k{name}_var"
                    var = _num(get(vc), r, vc)
                    if var <= 0:
                        raise CsvFormatError(f"row {r}, column {vc}: variance must be positive, got {var!r}")
                    if kind == "gaussian":
                        drow.append(Gaussian(mean, var))
                    else:
                        dc = f"k{name}_dof"
                        drow.append(StudentT(mean, math.sqrt(var), _num(get(dc), r, dc)))
                else:
                    mean = [_num(get(f"k{name}_mean_{i + 1}"), r, f"k{name}_mean_{i + 1}") for i in range(m)]
                    cov = np.zeros((m, m))
                    for i in range(m):
                        for j in range(i, m):
                            c = f"k{name}_cov_{i + 1}_{j + 1}"
                            cov[i, j] = cov[j, i] = _num(get(c), r, c)
                    for i in range(m):
                        if cov[i, i] <= 0:
                            c = f"k{name}_cov_{i + 1}_{i + 1}"
                            raise CsvFormatError(f"row {r}, column {c}: variance must be positive")
                    drow.append(MvGaussian(np.array(mean), cov))
            except DensityError as e:
                raise CsvFormatError(f"row {r}, model k{name}: {e}") from None
        dens.append(drow)
    if not dens:
        raise CsvFormatError(f"{path}: no data rows")
    y = np.array(ys)
    if m == 1:
        y = y[:, 0]
        if all(isinstance(d, Gaussian) for row in dens for d in row):
            means = [[d.mean for d in row] for row in dens]
            variances = [[d.variance for d in row] for row in dens]
            return ForecastPanel.gaussian(means, variances, y, model_names=names)
    return ForecastPanel(dens, y, model_names=names)


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def read_table(path) -> tuple:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
