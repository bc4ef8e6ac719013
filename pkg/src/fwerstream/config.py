"""Procedure configuration: a plain, serializable description of a scheduler.

A :class:`ProcedureConfig` mirrors the CLI flags / JSON config keys and
knows how to build the concrete scheduler.  Canonical procedure names:

    alpha-spending, online-sidak, online-fallback, online-fallback-1,
    discard-spending, adaptive-spending, addis-spending,
    addis-spending-local, discard-sidak, adaptive-sidak, addis-sidak,
    discard-fallback

with the short aliases discard, adaptive, addis, addis-local.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import addis as _addis
from . import variants as _variants
from .addis import LagSchedule, lags_from_config
from .core import AlphaSpending, OnlineFallback, OnlineSidak, OneStepWeights, weights_from_config
from .errors import ConfigError
from .series import series_from_config

_ALIASES = {
    "discard": "discard-spending",
    "adaptive": "adaptive-spending",
    "addis": "addis-spending",
    "addis-local": "addis-spending-local",
    "fallback": "online-fallback",
    "fallback-1": "online-fallback-1",
    "sidak": "online-sidak",
    "spending": "alpha-spending",
}

PROCEDURES = (
    "alpha-spending",
    "online-sidak",
    "online-fallback",
    "online-fallback-1",
    "discard-spending",
    "adaptive-spending",
    "addis-spending",
    "addis-spending-local",
    "discard-sidak",
    "adaptive-sidak",
    "addis-sidak",
    "discard-fallback",
)


def canonical_name(name: str) -> str:
    n = str(name).strip().lower()
    n = _ALIASES.get(n, n)
    if n not in PROCEDURES:
        raise ConfigError(f"unknown procedure {name!r}; known: {', '.join(PROCEDURES)}")
    return n


def _default_series() -> dict:
    return {"kind": "log-q", "q": 2.0}


@dataclass(frozen=True)
class ProcedureConfig:
    """Everything needed to instantiate one scheduler."""

    procedure: str
    alpha: float
    series: object = field(default_factory=_default_series)
    tau: object = None
    lam: object = None
    lags: object = None
    weights: object = None
    k: int = 1

    def __post_init__(self):
        object.__setattr__(self, "procedure", canonical_name(self.procedure))

    def build(self, batch_ids=None):
        """Instantiate the scheduler; ``batch_ids`` resolves stream-derived lags."""
        name = self.procedure
        series = series_from_config(self.series)
        tau = _addis.DEFAULT_TAU if self.tau is None else self.tau
        lam = _addis.DEFAULT_LAM if self.lam is None else self.lam
        if name == "alpha-spending":
            return AlphaSpending(self.alpha, series, k=self.k)
        if name == "online-sidak":
            return OnlineSidak(self.alpha, series, k=self.k)
        if name == "online-fallback":
            return OnlineFallback(self.alpha, series, weights_from_config(self.weights, series), k=self.k)
        if name == "online-fallback-1":
            if self.weights is not None:
                raise ConfigError("online-fallback-1 fixes one-step weights; do not pass 'weights'")
            return OnlineFallback(self.alpha, series, OneStepWeights(), k=self.k)
        if name == "discard-spending":
            return _addis.DiscardSpending(self.alpha, series, tau, k=self.k)
        if name == "adaptive-spending":
            return _addis.AdaptiveSpending(self.alpha, series, 0.5 if self.lam is None else self.lam, k=self.k)
        if name == "addis-spending":
            return _addis.AddisSpending(self.alpha, series, tau, lam, k=self.k)
        if name == "addis-spending-local":
            return _addis.AddisLocalSpending(self.alpha, series, tau, lam, self._resolve_lags(batch_ids), k=self.k)
        if name == "discard-sidak":
            return _variants.DiscardSidak(self.alpha, series, tau, k=self.k)
        if name == "adaptive-sidak":
            return _variants.AdaptiveSidak(self.alpha, series, 0.5 if self.lam is None else self.lam, k=self.k)
        if name == "addis-sidak":
            return _variants.AddisSidak(self.alpha, series, tau, lam, k=self.k)
        if name == "discard-fallback":
            return _variants.DiscardFallback(self.alpha, series, tau, weights_from_config(self.weights, series), k=self.k)
        raise ConfigError(f"unknown procedure {name!r}")  # unreachable

    def _resolve_lags(self, batch_ids) -> LagSchedule:
        cfg = self.lags
        if isinstance(cfg, dict) and str(cfg.get("kind", "")).lower() in ("from-batch-ids", "batch"):
            if "batch_ids" in cfg:
                return LagSchedule.from_batch_ids(cfg["batch_ids"])
            if batch_ids is None:
                raise ConfigError("lags kind 'from-batch-ids' needs a stream with a batch_id column")
            return LagSchedule.from_batch_ids(batch_ids)
        return lags_from_config(cfg)

    def wants_batch_lags(self) -> bool:
        cfg = self.lags
        return (
            isinstance(cfg, dict)
            and str(cfg.get("kind", "")).lower() in ("from-batch-ids", "batch")
            and "batch_ids" not in cfg
        )

    def validate(self) -> list[str]:
        """Return a list of human-readable findings; empty means valid."""
        findings: list[str] = []
        try:
            series = series_from_config(self.series)
            z_lo, z_hi = series.normalizer_bracket()
            if z_hi - z_lo > 2e-12 * max(z_lo, 1e-300):
                findings.append(f"series normalizer bracket too wide: [{z_lo}, {z_hi}]")
        except (ConfigError, ValueError) as exc:
            findings.append(f"series: {exc}")
        try:
            if not self.wants_batch_lags():
                self.build()
            else:
                replace(self, lags=None).build()
        except (ConfigError, ValueError) as exc:
            findings.append(str(exc))
        return findings

    def to_dict(self) -> dict:
        out = {"procedure": self.procedure, "alpha": self.alpha}
        series = self.series
        out["series"] = series.config() if hasattr(series, "config") else series
        if self.tau is not None:
            out["tau"] = self.tau
        if self.lam is not None:
            out["lambda"] = self.lam
        if self.lags is not None:
            out["lags"] = self.lags.config() if hasattr(self.lags, "config") else self.lags
        if self.weights is not None:
            out["weights"] = self.weights.config() if hasattr(self.weights, "config") else self.weights
        if self.k != 1:
            out["k"] = self.k
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ProcedureConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"procedure config must be a dict, got {d!r}")
        if "procedure" not in d:
            raise ConfigError("procedure config needs a 'procedure' key")
        if "alpha" not in d:
            raise ConfigError("procedure config needs an 'alpha' key")
        known = {"procedure", "alpha", "series", "tau", "lambda", "lam", "lags", "weights", "fallback_weights", "k"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown procedure config keys: {sorted(unknown)}")
        alpha = d["alpha"]
        if not isinstance(alpha, (int, float)) or isinstance(alpha, bool):
            raise ConfigError(f"alpha must be a number, got {alpha!r}")
        k = d.get("k", 1)
        if not isinstance(k, int) or isinstance(k, bool):
            raise ConfigError(f"k must be an integer, got {k!r}")
        return cls(
            procedure=d["procedure"],
            alpha=float(alpha),
            series=d.get("series", _default_series()),
            tau=d.get("tau"),
            lam=d.get("lambda", d.get("lam")),
            lags=d.get("lags"),
            weights=d.get("weights", d.get("fallback_weights")),
            k=k,
        )
