"""Empirical measures, estimation settings and solver configuration."""

from __future__ import annotations

import csv
import enum
import io
import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateSample, InvalidInput


class Kind(enum.Enum):
    """Shape constraint family."""

    LOG_CONCAVE = "1"
    TAIL_GAUSS = "2a"
    TAIL_GAMMA = "2b"


@dataclass(frozen=True)
class Setting:
    """Estimation setting: constraint family plus reference measure.

    ``LOG_CONCAVE`` uses Lebesgue measure and concave log-densities,
    ``TAIL_GAUSS`` uses a standard normal reference and convex
    log-density ratios, ``TAIL_GAMMA`` uses a Gamma(alpha, beta)
    reference and convex nondecreasing log-density ratios.
    """

    kind: Kind
    alpha: Optional[float] = None
    beta: Optional[float] = None

    def __post_init__(self):
        if self.kind is Kind.TAIL_GAMMA:
            for name in ("alpha", "beta"):
                v = getattr(self, name)
                if v is None or not math.isfinite(v) or v <= 0:
                    raise InvalidInput(f"{name} must be finite and > 0, got {v!r}")
            object.__setattr__(self, "alpha", float(self.alpha))
            object.__setattr__(self, "beta", float(self.beta))
        elif self.alpha is not None or self.beta is not None:
            raise InvalidInput("alpha and beta only apply to the Gamma reference")

    @classmethod
    def log_concave(cls) -> "Setting":
        return cls(Kind.LOG_CONCAVE)

    @classmethod
    def gauss(cls) -> "Setting":
        return cls(Kind.TAIL_GAUSS)

    @classmethod
    def gamma(cls, alpha: float = 1.0, beta: float = 1.0) -> "Setting":
        return cls(Kind.TAIL_GAMMA, alpha, beta)

    @classmethod
    def from_label(cls, label: str, alpha: float = 1.0, beta: float = 1.0) -> "Setting":
        """Build a setting from its CLI label ``1``, ``2a`` or ``2b``."""
        label = str(label).lower()
        if label == "1":
            return cls.log_concave()
        if label == "2a":
            return cls.gauss()
        if label == "2b":
            return cls.gamma(alpha, beta)
        raise InvalidInput(f"unknown setting {label!r}")

    @property
    def label(self) -> str:
        return self.kind.value

    @property
    def xi(self) -> int:
        """Sign of the kink functions: -1 for concavity, +1 for convexity."""
        return -1 if self.kind is Kind.LOG_CONCAVE else 1


@dataclass(frozen=True, eq=False)
class WeightedSample:
    """Discrete probability measure on strictly increasing support points.

    Parameters
    ----------
    points : array_like
        Strictly increasing finite support points.
    weights : array_like
        Positive weights summing to one.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.array(self.points, dtype=float)
        w = np.array(self.weights, dtype=float)
        if x.ndim != 1 or x.shape != w.shape:
            raise InvalidInput("points and weights must be 1-d arrays of equal length")
        if x.size < 2:
            raise DegenerateSample("need at least two distinct points")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise InvalidInput("non-finite point or weight")
        if np.any(np.diff(x) <= 0):
            raise InvalidInput("points must be strictly increasing")
        if np.any(w <= 0):
            raise InvalidInput("weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInput("weights must sum to one")
        x.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.size

    @cached_property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.points))

    @cached_property
    def var(self) -> float:
        return float(np.dot(self.weights, (self.points - self.mean) ** 2))

    @property
    def std(self) -> float:
        return math.sqrt(self.var)

    @cached_property
    def _cum(self) -> Tuple[np.ndarray, np.ndarray]:
        cw = np.concatenate(([0.0], np.cumsum(self.weights)))
        cx = np.concatenate(([0.0], np.cumsum(self.weights * self.points)))
        return cw, cx

    def _index(self, t, side="right"):
        return np.searchsorted(self.points, t, side=side)

    def cdf(self, t):
        """Empirical distribution function ``P((-inf, t])``."""
        cw, _ = self._cum
        return cw[self._index(t)]

    def mass(self, a, b):
        """Weight of the half-open interval ``(a, b]``."""
        cw, _ = self._cum
        return cw[self._index(b)] - cw[self._index(a)]

    def moment(self, a, b):
        """Sum of ``w_i * x_i`` over points in ``(a, b]``."""
        _, cx = self._cum
        return cx[self._index(b)] - cx[self._index(a)]

    def upper_partial(self, t):
        """``sum_i w_i (x_i - t)^+``."""
        cw, cx = self._cum
        i = self._index(t)
        return (cx[-1] - cx[i]) - np.asarray(t) * (cw[-1] - cw[i])

    def pairs(self):
        return list(zip(self.points.tolist(), self.weights.tolist()))


def ingest(raw_pairs: Iterable[Tuple[float, float]]) -> WeightedSample:
    """Build a normalized sample from ``(x, w)`` pairs.

    Duplicate points are merged by summing their weights and the
    weights are rescaled to sum to one. Pairs with zero weight are
    dropped.
    """
    pairs = [(float(x), float(w)) for x, w in raw_pairs]
    if not pairs:
        raise DegenerateSample("empty sample")
    x = np.array([p[0] for p in pairs])
    w = np.array([p[1] for p in pairs])
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
        raise InvalidInput("non-finite value in sample")
    if np.any(w < 0):
        raise InvalidInput("negative weight")
    keep = w > 0
    x, w = x[keep], w[keep]
    if x.size == 0:
        raise DegenerateSample("total weight is zero")
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    ux, inv = np.unique(x, return_inverse=True)
    if ux.size < 2:
        raise DegenerateSample("need at least two distinct points")
    uw = np.zeros(ux.size)
    np.add.at(uw, inv, w)
    uw = uw / uw.sum()
    # one correction pass keeps the sum within a few ulps of 1
    uw = uw / math.fsum(uw)
    return WeightedSample(ux, uw)


def check_sample(sample: WeightedSample, setting: Setting) -> None:
    """Validate that a sample lies in the domain of ``setting``."""
    if setting.kind is Kind.TAIL_GAMMA and sample.points[0] <= 0:
        raise InvalidInput("the Gamma setting needs all points > 0")


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and limits of the active-set solver.

    ``None`` tolerances resolve to the sample-size dependent defaults
    ``delta1 = 1e-10/n``, ``delta2 = 1e-4/n`` and ``delta_o = delta2/10``.
    """

    setting: Setting
    delta1: Optional[float] = None
    delta2: Optional[float] = None
    delta_o: Optional[float] = None
    max_newton: int = 200
    max_outer: int = 500
    seed: int = 0
    multi_knot: bool = False
    gaussian_start: bool = False

    def __post_init__(self):
        for name in ("delta1", "delta2", "delta_o"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise InvalidInput(f"{name} must be positive, got {v!r}")
        if self.delta1 is not None and self.delta2 is not None and self.delta1 >= self.delta2:
            raise InvalidInput("delta1 must be smaller than delta2")
        if self.max_newton < 1 or self.max_outer < 1:
            raise InvalidInput("iteration caps must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInput("seed must be an unsigned 64-bit integer")

    def tolerances(self, n: int) -> Tuple[float, float, float]:
        """Resolved ``(delta1, delta2, delta_o)`` for sample size ``n``."""
        d1 = self.delta1 if self.delta1 is not None else 1e-10 / n
        d2 = self.delta2 if self.delta2 is not None else 1e-4 / n
        do = self.delta_o if self.delta_o is not None else d2 / 10
        if d1 >= d2:
            raise InvalidInput("delta1 must be smaller than delta2")
        return d1, d2, do


# ---------------------------------------------------------------- CSV input

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$|^[+-]?(inf|nan)$", re.I)


def _split(line: str, delim: Optional[str]) -> list:
    if delim is None:
        return line.split()
    return [f.strip() for f in next(csv.reader([line], delimiter=delim))]


def parse_csv(text: str) -> WeightedSample:
    """Parse one- or two-column numeric text into a sample.

    The delimiter (comma, semicolon, tab or runs of whitespace) is
    detected from the first data row. A first row that is not numeric
    is treated as a header.
    """
    rows = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    rows = [(i, ln) for i, ln in rows if ln and not ln.startswith("#")]
    if not rows:
        raise DegenerateSample("no data rows")

    def delim_of(line):
        for d in (",", ";", "\t"):
            if d in line:
                return d
        return None

    delim = delim_of(rows[0][1])
    first = _split(rows[0][1], delim)
    if not all(_NUMBER.match(f) for f in first if f):
        rows = rows[1:]
        if not rows:
            raise DegenerateSample("header without data")
        delim = delim_of(rows[0][1])
    ncol = None
    pairs = []
    for lineno, line in rows:
        fields = [f for f in _split(line, delim) if f != ""]
        if ncol is None:
            ncol = len(fields)
            if ncol not in (1, 2):
                raise InvalidInput(f"line {lineno}: expected 1 or 2 columns, got {ncol}")
        if len(fields) != ncol:
            raise InvalidInput(f"line {lineno}: expected {ncol} columns, got {len(fields)}")
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            raise InvalidInput(f"line {lineno}: non-numeric field in {line!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInput(f"line {lineno}: non-finite value")
        if ncol == 2 and vals[1] < 0:
            raise InvalidInput(f"line {lineno}: negative weight")
        pairs.append((vals[0], vals[1] if ncol == 2 else 1.0))
    return ingest(pairs)


def read_csv(path) -> WeightedSample:
    """Read a sample from a CSV file, see :func:`parse_csv`."""
    return parse_csv(Path(path).read_text())


def write_csv(path, columns: Sequence[np.ndarray], header: Sequence[str]) -> None:
    """Write equally long numeric columns with a header line."""
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    Path(path).write_text(buf.getvalue())
