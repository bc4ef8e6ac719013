"""Adaptive and discarding schedulers, their lagged alterations, and k-FWER wrapping.

Discarding skips hypotheses whose p-value exceeds a threshold tau_i and
rescales the spent budget by 1/tau_i, which exploits conservative nulls.
Adaptivity refunds budget for hypotheses whose p-value falls below a
candidate threshold lambda_i, which exploits a high non-null fraction.
ADDIS combines both.  All three keep the discipline that each series
index gamma_t is consumed by at most one budgeted step, which is what
certifies the prefix budget constraints audited in :mod:`fwerstream.audit`.

The lagged variant defends against local dependence: the level, tau and
lambda at step i may depend only on decisions at least L_i + 1 steps old,
and the unseen window is charged pessimistically (one budgeted step per
lagged position).
"""

from __future__ import annotations

import dataclasses
import warnings

from .core import Decision, OnlineProcedure, Schedule
from .errors import ConfigError

DEFAULT_TAU = 0.5
DEFAULT_LAM = 0.25

# Procedures whose proofs bound the expected number of false rejections
# (PFER) by the budget; only these admit the k-FWER budget inflation.
PFER_FAMILY = frozenset(
    {
        "alpha-spending",
        "discard-spending",
        "adaptive-spending",
        "addis-spending",
        "addis-spending-local",
    }
)


def _tau_schedule(tau) -> Schedule:
    return Schedule(tau, "tau", 0.0, 1.0, lo_open=True, hi_open=False)


def _lam_schedule(lam) -> Schedule:
    return Schedule(lam, "lambda", 0.0, 1.0, lo_open=False, hi_open=True)


class LagSchedule:
    """Lags L_i: step i may depend on decisions with index < i - L_i only.

    Admissibility requires L_{i+1} <= L_i + 1 (the observable past never
    shrinks).  Build one with :meth:`constant`, :meth:`from_list`, or
    :meth:`from_batch_ids`; batch ids give each item a lag equal to the
    number of earlier items in its batch, so a whole batch depends only on
    pre-batch information.
    """

    def __init__(self, constant: int | None = None, values: list[int] | None = None):
        self._constant = constant
        self._values = values

    @classmethod
    def constant(cls, lag: int) -> "LagSchedule":
        if not (isinstance(lag, int) and lag >= 0):
            raise ConfigError(f"constant lag must be a nonnegative integer, got {lag!r}")
        return cls(constant=lag)

    @classmethod
    def from_list(cls, lags) -> "LagSchedule":
        values = []
        for i, lag in enumerate(lags, start=1):
            if not (isinstance(lag, int) and lag >= 0):
                raise ConfigError(f"lag L_{i} must be a nonnegative integer, got {lag!r}")
            if values and lag > values[-1] + 1:
                raise ConfigError(
                    f"inadmissible lags: L_{i} = {lag} > L_{i-1} + 1 = {values[-1] + 1}"
                )
            values.append(lag)
        return cls(values=values)

    @classmethod
    def from_batch_ids(cls, batch_ids) -> "LagSchedule":
        values: list[int] = []
        seen: set = set()
        current = object()
        run = 0
        for b in batch_ids:
            if b != current:
                if b in seen:
                    raise ConfigError(f"batch id {b!r} appears in two separate runs")
                seen.add(b)
                current, run = b, 0
            values.append(run)
            run += 1
        return cls(values=values)

    @property
    def is_constant(self) -> bool:
        return self._constant is not None

    @property
    def horizon(self) -> int | None:
        return None if self._constant is not None else len(self._values)

    def lag(self, i: int) -> int:
        if self._constant is not None:
            return self._constant
        if i > len(self._values):
            raise ConfigError(f"lag schedule has {len(self._values)} entries; step {i} requested")
        return self._values[i - 1]

    def values_upto(self, n: int) -> list[int]:
        if self._constant is not None:
            return [self._constant] * n
        if n > len(self._values):
            raise ConfigError(f"lag schedule has {len(self._values)} entries; {n} requested")
        return self._values[:n]

    def config(self) -> dict:
        if self._constant is not None:
            return {"kind": "constant", "value": self._constant}
        return {"kind": "list", "values": list(self._values)}


def lags_from_config(cfg) -> LagSchedule:
    if isinstance(cfg, LagSchedule):
        return cfg
    if cfg is None:
        return LagSchedule.constant(0)
    if isinstance(cfg, int):
        return LagSchedule.constant(cfg)
    if isinstance(cfg, (list, tuple)):
        return LagSchedule.from_list(cfg)
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError(f"lags config must be a dict with a 'kind', got {cfg!r}")
    kind = str(cfg["kind"]).lower()
    if kind == "constant":
        return LagSchedule.constant(cfg.get("value", 0))
    if kind == "list":
        return LagSchedule.from_list(cfg.get("values", []))
    if kind in ("from-batch-ids", "batch"):
        if "batch_ids" not in cfg:
            raise ConfigError("lags kind 'from-batch-ids' resolves against a stream; no batch_ids given")
        return LagSchedule.from_batch_ids(cfg["batch_ids"])
    raise ConfigError(f"unknown lags kind {cfg['kind']!r}")


class _AdaptiveBase(OnlineProcedure):
    """Shared plumbing: tau/lambda schedules and visible-prefix handling."""

    def __init__(self, alpha, series, tau, lam, *, k=1):
        super().__init__(alpha, series, k=k)
        self._tau = _tau_schedule(tau)
        self._lam = _lam_schedule(lam)
        self._needs_prefix = self._tau.needs_prefix() or self._lam.needs_prefix()
        if self._tau.is_constant and self._lam.is_constant:
            self._check_pair(self._tau.constant, self._lam.constant)

    def _check_pair(self, tau_i: float, lam_i: float) -> None:
        if lam_i >= tau_i:
            raise ConfigError(f"lambda must be < tau, got lambda={lam_i} >= tau={tau_i}")

    def _thresholds(self, i: int, visible: int) -> tuple[float, float]:
        prefix = tuple(self.trace[:visible]) if self._needs_prefix else None
        tau_i = self._tau.value(i, prefix)
        lam_i = self._lam.value(i, prefix)
        if not (self._tau.is_constant and self._lam.is_constant):
            self._check_pair(tau_i, lam_i)
        return tau_i, lam_i


class DiscardSpending(_AdaptiveBase):
    """Spend alpha * tau_i * gamma_t(i), where t advances only on selected
    (p <= tau_i) hypotheses; discarded ones are never rejected and leave
    the series index untouched."""

    kind = "discard-spending"
    pfer_budgeted = True

    def __init__(self, alpha, series, tau=DEFAULT_TAU, *, k=1):
        super().__init__(alpha, series, tau, 0.0, k=k)
        self._selected = 0

    def _step(self, i: int, p: float) -> Decision:
        tau_i, _ = self._thresholds(i, i - 1)
        a = self._finalize(self.budget * tau_i * self.series.weight(1 + self._selected), tau_i)
        selected = p <= tau_i
        rejected = self._rejects(p, a)
        if selected:
            self._selected += 1
        return Decision(i, p, a, rejected, selected=selected, tau=tau_i)


class AdaptiveSpending(_AdaptiveBase):
    """Spend alpha * (1 - lambda_i) * gamma_t(i), where candidate steps
    (p <= lambda_i) do not advance the series index: their budget is
    refunded because a candidate cannot be a spent null."""

    kind = "adaptive-spending"
    pfer_budgeted = True

    def __init__(self, alpha, series, lam=0.5, *, k=1):
        super().__init__(alpha, series, 1.0, lam, k=k)
        self._candidates = 0

    def _step(self, i: int, p: float) -> Decision:
        _, lam_i = self._thresholds(i, i - 1)
        g = self.series.weight(i - self._candidates)
        a = self._finalize(self.budget * (1.0 - lam_i) * g)
        candidate = p <= lam_i
        rejected = self._rejects(p, a)
        if candidate:
            self._candidates += 1
        return Decision(i, p, a, rejected, candidate=candidate, lam=lam_i)


class AddisSpending(_AdaptiveBase):
    """Adaptive discarding: spend alpha * (tau_i - lambda_i) * gamma_t(i),
    with t advancing on selected non-candidate steps only."""

    kind = "addis-spending"
    pfer_budgeted = True

    def __init__(self, alpha, series, tau=DEFAULT_TAU, lam=DEFAULT_LAM, *, k=1):
        super().__init__(alpha, series, tau, lam, k=k)
        self._net = 0  # running sum of S_j - C_j

    def _step(self, i: int, p: float) -> Decision:
        tau_i, lam_i = self._thresholds(i, i - 1)
        g = self.series.weight(1 + self._net)
        a = self._finalize(self.budget * (tau_i - lam_i) * g, tau_i)
        selected = p <= tau_i
        candidate = p <= lam_i
        rejected = self._rejects(p, a)
        self._net += int(selected) - int(candidate)
        return Decision(i, p, a, rejected, selected=selected, candidate=candidate, tau=tau_i, lam=lam_i)


class AddisLocalSpending(_AdaptiveBase):
    """ADDIS altered for local dependence with lags L_i.

    The level at step i uses only decisions with index < i - L_i; each of
    the min(L_i, i-1) unseen steps is charged as if it were a budgeted
    step, so the procedure stays valid whatever happened inside the lag
    window.
    """

    kind = "addis-spending-local"
    pfer_budgeted = True

    def __init__(self, alpha, series, tau=DEFAULT_TAU, lam=DEFAULT_LAM, lags=None, *, k=1):
        super().__init__(alpha, series, tau, lam, k=k)
        self.lags = lags_from_config(lags)
        self._net_prefix = [0]  # net_prefix[j] = sum of S - C over the first j steps

    def _step(self, i: int, p: float) -> Decision:
        lag = self.lags.lag(i)
        visible = max(0, i - 1 - lag)
        tau_i, lam_i = self._thresholds(i, visible)
        t = 1 + min(lag, i - 1) + self._net_prefix[visible]
        a = self._finalize(self.budget * (tau_i - lam_i) * self.series.weight(t), tau_i)
        selected = p <= tau_i
        candidate = p <= lam_i
        rejected = self._rejects(p, a)
        self._net_prefix.append(self._net_prefix[-1] + int(selected) - int(candidate))
        return Decision(i, p, a, rejected, selected=selected, candidate=candidate, tau=tau_i, lam=lam_i)


def kfwer_wrap(config, k: int):
    """Return ``config`` with its level budget inflated to k * alpha.

    The wrapped procedure guarantees P(at least k false rejections) <= alpha
    by Markov's inequality on the PFER, so only spending-family procedures
    qualify.  k = 1 is the identity.
    """
    if not (isinstance(k, int) and k >= 1):
        raise ConfigError(f"k must be a positive integer, got {k!r}")
    if config.procedure not in PFER_FAMILY:
        raise ConfigError(
            f"k-FWER wrapping requires a PFER-controlling procedure, got {config.procedure!r}"
        )
    if k * config.alpha >= 1.0:
        warnings.warn(
            f"k*alpha = {k * config.alpha} >= 1: test levels may saturate and will be "
            "clamped below tau_i and 1",
            stacklevel=2,
        )
    return dataclasses.replace(config, k=k)
