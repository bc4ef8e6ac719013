"""Weight series gamma_1, gamma_2, ... that drive every allocation rule.

Three kinds are supported:

* q-series:      gamma_i proportional to i^(-q), q > 1
* log-q-series:  gamma_i proportional to 1/((i+1) * log(i+1)^q), q > 1
* explicit:      a finite user-supplied list with sum at most one

For the two infinite families the normalizer (the infinite sum of the
unnormalized terms) is computed by partial summation plus integral tail
bounds.  Because the terms are convex and decreasing, the tail T(M) =
sum_{i>M} u_i is bracketed by

    integral_{M+1}^inf u(x) dx + u(M+1)/2   <=   T(M)   <=   integral_{M+1/2}^inf u(x) dx

(trapezoid bound below, midpoint bound above).  M is doubled until the
bracket width is below 1e-12 of the normalizer, so every reported weight
carries a certified relative error of at most ~1e-12.
"""

from __future__ import annotations

import math
import threading

import numpy as np

from .errors import ConfigError

# Relative half-width demanded of the normalizer bracket.
NORMALIZER_RTOL = 1e-12

_CHUNK = 1 << 20


def _chunked_sum(term_fn, n: int) -> float:
    """Sum term_fn over integer indices 1..n in chunks (vectorized)."""
    total = 0.0
    lo = 1
    while lo <= n:
        hi = min(lo + _CHUNK - 1, n)
        total += float(np.sum(term_fn(np.arange(lo, hi + 1, dtype=np.float64))))
        lo = hi + 1
    return total


class WeightSeries:
    """Base class: a nonnegative weight sequence with certified sum <= 1.

    Instances are immutable after construction; the weight memo grows
    lazily under a lock, so concurrent reads are safe.
    """

    kind = "base"

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._memo = np.empty(0, dtype=np.float64)

    # -- to be provided by subclasses ----------------------------------
    def _unnormalized(self, idx: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def normalizer(self) -> float:
        raise NotImplementedError

    def normalizer_bracket(self) -> tuple[float, float]:
        raise NotImplementedError

    def tail_sum_bracket(self, n: int) -> tuple[float, float]:
        """Bracket for sum_{i>n} gamma_i (normalized)."""
        raise NotImplementedError

    # -- shared accessors -----------------------------------------------
    def _ensure(self, n: int) -> np.ndarray:
        memo = self._memo
        if memo.size >= n:
            return memo
        with self._lock:
            if self._memo.size < n:
                size = 1 << max(10, (n - 1).bit_length())
                idx = np.arange(1, size + 1, dtype=np.float64)
                fresh = self._unnormalized(idx) / self.normalizer
                fresh.flags.writeable = False
                self._memo = fresh
            return self._memo

    def weight(self, i: int) -> float:
        """gamma_i for 1-based index i.  Deterministic across calls."""
        if i < 1:
            raise IndexError(f"series index must be >= 1, got {i}")
        return float(self._ensure(i)[i - 1])

    def weights_upto(self, n: int) -> np.ndarray:
        """Read-only array [gamma_1, ..., gamma_n]."""
        if n < 0:
            raise IndexError(f"length must be >= 0, got {n}")
        if n == 0:
            return np.empty(0, dtype=np.float64)
        return self._ensure(n)[:n]

    def partial_sum(self, n: int) -> float:
        return float(np.sum(self.weights_upto(n)))

    def config(self) -> dict:
        raise NotImplementedError


def _certify(term_fn, tail_lo_fn, tail_hi_fn) -> tuple[float, float, float, int]:
    """Double M until [S_M + tail_lo(M), S_M + tail_hi(M)] is 1e-12-tight.

    Returns (z_lo, z_hi, partial_sum_at_M, M).  A small floating-point
    slack proportional to machine epsilon is folded into the bracket.
    """
    m = 1 << 10
    s = _chunked_sum(term_fn, m)
    while True:
        lo = tail_lo_fn(m)
        hi = tail_hi_fn(m)
        fp_slack = 64.0 * np.finfo(float).eps * s
        z_lo = s + lo - fp_slack
        z_hi = s + hi + fp_slack
        if z_hi - z_lo <= 2.0 * NORMALIZER_RTOL * z_lo:
            return z_lo, z_hi, s, m
        if m >= (1 << 34):
            raise RuntimeError("normalizer bracket failed to converge")
        s += float(np.sum(term_fn(np.arange(m + 1, 2 * m + 1, dtype=np.float64))))
        m *= 2


class QSeries(WeightSeries):
    """gamma_i = i^(-q) / Z(q) with Z(q) = sum_{i>=1} i^(-q), q > 1."""

    kind = "q"

    def __init__(self, q: float):
        if not (isinstance(q, (int, float)) and math.isfinite(q) and q > 1.0):
            raise ConfigError(f"q-series requires q > 1, got {q!r}")
        super().__init__()
        self.q = float(q)
        q_ = self.q

        def tail_lo(m: int) -> float:
            # trapezoid lower bound on sum_{i>m} i^-q
            return (m + 1.0) ** (1.0 - q_) / (q_ - 1.0) + 0.5 * (m + 1.0) ** (-q_)

        def tail_hi(m: int) -> float:
            # midpoint upper bound (terms are convex)
            return (m + 0.5) ** (1.0 - q_) / (q_ - 1.0)

        self._z_lo, self._z_hi, self._raw_partial, self._m_cert = _certify(
            self._unnormalized, tail_lo, tail_hi
        )
        self._z = 0.5 * (self._z_lo + self._z_hi)
        self._tail_lo_fn, self._tail_hi_fn = tail_lo, tail_hi

    def _unnormalized(self, idx: np.ndarray) -> np.ndarray:
        return idx ** (-self.q)

    @property
    def normalizer(self) -> float:
        return self._z

    def normalizer_bracket(self) -> tuple[float, float]:
        return self._z_lo, self._z_hi

    def tail_sum_bracket(self, n: int) -> tuple[float, float]:
        return self._tail_lo_fn(n) / self._z_hi, self._tail_hi_fn(n) / self._z_lo

    def config(self) -> dict:
        return {"kind": "q", "q": self.q}


class LogQSeries(WeightSeries):
    """gamma_i = u_i / Z with u_i = 1 / ((i+1) * log(i+1)^q), q > 1."""

    kind = "log-q"

    def __init__(self, q: float):
        if not (isinstance(q, (int, float)) and math.isfinite(q) and q > 1.0):
            raise ConfigError(f"log-q-series requires q > 1, got {q!r}")
        super().__init__()
        self.q = float(q)
        q_ = self.q

        def u(y: float) -> float:
            return 1.0 / (y * math.log(y) ** q_)

        def tail_lo(m: int) -> float:
            # i > m maps to y = i+1 >= m+2
            return math.log(m + 2.0) ** (1.0 - q_) / (q_ - 1.0) + 0.5 * u(m + 2.0)

        def tail_hi(m: int) -> float:
            return math.log(m + 1.5) ** (1.0 - q_) / (q_ - 1.0)

        self._z_lo, self._z_hi, self._raw_partial, self._m_cert = _certify(
            self._unnormalized, tail_lo, tail_hi
        )
        self._z = 0.5 * (self._z_lo + self._z_hi)
        self._tail_lo_fn, self._tail_hi_fn = tail_lo, tail_hi

    def _unnormalized(self, idx: np.ndarray) -> np.ndarray:
        y = idx + 1.0
        return 1.0 / (y * np.log(y) ** self.q)

    @property
    def normalizer(self) -> float:
        return self._z

    def normalizer_bracket(self) -> tuple[float, float]:
        return self._z_lo, self._z_hi

    def tail_sum_bracket(self, n: int) -> tuple[float, float]:
        return self._tail_lo_fn(n) / self._z_hi, self._tail_hi_fn(n) / self._z_lo

    def config(self) -> dict:
        return {"kind": "log-q", "q": self.q}


class ExplicitSeries(WeightSeries):
    """A finite list of nonnegative weights with total at most one.

    Indices beyond the list carry weight zero: any shortfall of the sum
    below one is an unspendable tail, never extra rejections.
    """

    kind = "explicit"

    def __init__(self, weights):
        super().__init__()
        w = np.asarray(list(weights), dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ConfigError("explicit series needs a nonempty 1-d weight list")
        if not np.all(np.isfinite(w)) or np.any(w < 0.0):
            raise ConfigError("explicit series weights must be finite and >= 0")
        total = math.fsum(w.tolist())
        if total > 1.0 + 1e-12:
            raise ConfigError(f"explicit series weights sum to {total} > 1")
        w.flags.writeable = False
        self._w = w
        self._total = min(total, 1.0)

    def _unnormalized(self, idx: np.ndarray) -> np.ndarray:
        out = np.zeros(idx.shape, dtype=np.float64)
        inside = idx <= self._w.size
        out[inside] = self._w[(idx[inside] - 1).astype(np.intp)]
        return out

    @property
    def normalizer(self) -> float:
        return 1.0  # weights are stored as given, not renormalized

    def normalizer_bracket(self) -> tuple[float, float]:
        return self._total, self._total

    def tail_sum_bracket(self, n: int) -> tuple[float, float]:
        rest = math.fsum(self._w[n:].tolist()) if n < self._w.size else 0.0
        return rest, rest

    def weight(self, i: int) -> float:
        if i < 1:
            raise IndexError(f"series index must be >= 1, got {i}")
        return float(self._w[i - 1]) if i <= self._w.size else 0.0

    def config(self) -> dict:
        return {"kind": "explicit", "weights": [float(x) for x in self._w]}


_KIND_ALIASES = {
    "q": "q",
    "q-series": "q",
    "log-q": "log-q",
    "logq": "log-q",
    "log-q-series": "log-q",
    "explicit": "explicit",
}


def series_from_config(cfg) -> WeightSeries:
    """Build a series from {"kind": ..., "q": ...} / {"kind": "explicit", "weights": [...]}."""
    if isinstance(cfg, WeightSeries):
        return cfg
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError(f"series config must be a dict with a 'kind', got {cfg!r}")
    kind = _KIND_ALIASES.get(str(cfg["kind"]).lower())
    if kind is None:
        raise ConfigError(f"unknown series kind {cfg['kind']!r}")
    if kind == "explicit":
        if "weights" not in cfg:
            raise ConfigError("explicit series config needs 'weights'")
        return ExplicitSeries(cfg["weights"])
    if "q" not in cfg:
        raise ConfigError(f"{kind}-series config needs 'q'")
    q = cfg["q"]
    if not isinstance(q, (int, float)):
        raise ConfigError(f"series exponent q must be a number, got {q!r}")
    return QSeries(q) if kind == "q" else LogQSeries(q)
