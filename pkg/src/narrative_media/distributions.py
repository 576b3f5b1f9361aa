"""Type distributions on [0, 1] given as a cdf.

Accepted specs: ``"uniform"``, ``"power:k"`` (F(c) = c**k), or a path to a
CSV table with columns ``c,F`` (linear interpolation between rows).
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .model_core import ModelError

CDF_TOL = 1e-9


class Cdf:
    """Vectorized cdf on [0, 1] with a partial first moment."""

    def __init__(self, fn, label: str, table=None, integral_fn=None):
        self._fn = fn
        self._integral_fn = integral_fn
        self.label = label
        self.table = table
        # cumulative integral of F on a fine grid; trapezoid, exact for piecewise-linear F
        xs = np.linspace(0.0, 1.0, 4001) if table is None else np.union1d(np.linspace(0.0, 1.0, 4001), table[0])
        Fx = self(xs)
        self._xs, self._Fx = xs, Fx
        self._IF = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(xs) * (Fx[1:] + Fx[:-1]))])
        self._check()

    def __call__(self, c):
        c = np.clip(np.asarray(c, dtype=float), 0.0, 1.0)
        out = self._fn(c)
        return float(out) if np.ndim(out) == 0 else out

    def _check(self):
        if abs(self(0.0)) > CDF_TOL or abs(self(1.0) - 1.0) > CDF_TOL:
            raise ModelError(f"F ({self.label}): need F(0)=0 and F(1)=1")
        if np.any(np.diff(self._Fx) <= 0.0):
            raise ModelError(f"F ({self.label}): must be strictly increasing on [0, 1]")

    def integral(self, c):
        """int_0^c F(x) dx."""
        c = np.clip(np.asarray(c, dtype=float), 0.0, 1.0)
        if self._integral_fn is not None:
            out = self._integral_fn(c)
            return float(out) if np.ndim(out) == 0 else out
        i = np.clip(np.searchsorted(self._xs, c, side="right") - 1, 0, len(self._xs) - 1)
        x0 = self._xs[i]
        out = self._IF[i] + 0.5 * (c - x0) * (self._Fx[i] + self(c))
        return float(out) if np.ndim(out) == 0 else out

    def moment(self, c):
        """int_0^c x dF(x) = c F(c) - int_0^c F."""
        return np.asarray(c) * self(c) - self.integral(c)

    def __repr__(self) -> str:
        return f"Cdf({self.label!r})"


def uniform() -> Cdf:
    return Cdf(lambda c: c * 1.0, "uniform", integral_fn=lambda c: c * c / 2.0)


def power(k: float) -> Cdf:
    if not (k > 0.0 and np.isfinite(k)):
        raise ModelError(f"F power exponent must be positive, got {k!r}")
    return Cdf(lambda c: c**k, f"power:{k:g}", integral_fn=lambda c: c ** (k + 1.0) / (k + 1.0))


def from_table(c, F, label: str = "table") -> Cdf:
    c, F = np.asarray(c, dtype=float), np.asarray(F, dtype=float)
    if c.ndim != 1 or c.shape != F.shape or len(c) < 2:
        raise ModelError(f"F ({label}): need two equal-length columns with at least two rows")
    if np.any(np.diff(c) <= 0.0):
        raise ModelError(f"F ({label}): c column must be strictly ascending")
    if abs(c[0]) > CDF_TOL or abs(c[-1] - 1.0) > CDF_TOL:
        raise ModelError(f"F ({label}): c column must span [0, 1]")
    return Cdf(lambda x: np.interp(x, c, F), label, table=(c, F))


def load_table(path) -> Cdf:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(x.strip() for x in r)]
    except OSError as exc:
        raise ModelError(f"F: cannot read {path}: {exc}") from exc
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows])
    except (ValueError, IndexError) as exc:
        raise ModelError(f"F ({path}): rows must be 'c,F' numbers") from exc
    if data.size == 0:
        raise ModelError(f"F ({path}): empty table")
    return from_table(data[:, 0], data[:, 1], str(path))


def _is_number(x: str) -> bool:
    try:
        float(x)
        return True
    except ValueError:
        return False


def parse_cdf(spec) -> Cdf:
    if isinstance(spec, Cdf):
        return spec
    text = str(spec).strip()
    if text.lower() == "uniform":
        return uniform()
    if text.lower().startswith("power:"):
        try:
            k = float(text.split(":", 1)[1])
        except ValueError:
            raise ModelError(f"F: bad power exponent in {text!r}") from None
        return power(k)
    if Path(text).suffix.lower() == ".csv" or Path(text).exists():
        return load_table(text)
    raise ModelError(f"F: expected 'uniform', 'power:k' or a CSV path, got {text!r}")
