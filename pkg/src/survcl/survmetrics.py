"""Survival evaluation: concordance index, Kaplan-Meier, k-sample log-rank.

Conventions: an event indicator of 1 means the event (death) was observed at
time t, 0 means the patient left observation at t (censored). Patients whose
recorded time equals an event time are counted as still at risk at that time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .special import chi2_sf

__all__ = ["KMCurve", "LogRankResult", "c_index", "km_fit", "logrank_k"]


def _aligned(*arrays):
    out = [np.asarray(a) for a in arrays]
    n = out[0].shape[0]
    for a in out:
        if a.ndim != 1 or a.shape[0] != n:
            raise ValueError("inputs must be 1-D and aligned")
    return out


def c_index(risk, t, e) -> float:
    """Harrell's concordance index.

    A pair (i, j) is comparable when t_i < t_j and the event was observed for
    i; pairs with equal recorded times are never comparable. Concordant means
    the earlier event carries the higher risk score; risk ties count half.
    """
    risk, t, e = _aligned(risk, t, e)
    comparable = (t[:, None] < t[None, :]) & (e[:, None] == 1)
    n_comp = comparable.sum()
    if n_comp == 0:
        raise ValueError("no comparable pairs (need an observed event with a later survivor)")
    concordant = comparable & (risk[:, None] > risk[None, :])
    tied = comparable & (risk[:, None] == risk[None, :])
    return float((concordant.sum() + 0.5 * tied.sum()) / n_comp)


@dataclass
class KMCurve:
    """Product-limit survival estimate: a right-continuous step function that
    starts at 1 and drops at each distinct event time."""

    times: np.ndarray  # distinct event times, sorted
    survival: np.ndarray  # S(t) just after each event time
    at_risk: np.ndarray
    events: np.ndarray

    def survival_at(self, time: float) -> float:
        idx = np.searchsorted(self.times, time, side="right")
        return 1.0 if idx == 0 else float(self.survival[idx - 1])

    def median(self) -> float | None:
        """First time the curve reaches 0.5 or below; None if it never does."""
        below = np.nonzero(self.survival <= 0.5)[0]
        return float(self.times[below[0]]) if below.size else None

    def restricted_mean(self, horizon: float) -> float:
        """Area under the step curve from 0 to ``horizon``."""
        if horizon <= 0:
            return 0.0
        grid = np.concatenate([[0.0], self.times, [horizon]])
        grid = np.clip(grid, 0.0, horizon)
        heights = np.concatenate([[1.0], self.survival])
        return float(np.sum(heights * np.diff(grid)))


def km_fit(t, e) -> KMCurve:
    """Kaplan-Meier estimator over the distinct observed event times."""
    t, e = _aligned(t, e)
    if np.any(t < 0):
        raise ValueError("survival times must be nonnegative")
    event_times = np.unique(t[e == 1])
    at_risk = np.empty(event_times.shape, dtype=np.int64)
    events = np.empty(event_times.shape, dtype=np.int64)
    surv = np.empty(event_times.shape)
    s = 1.0
    for k, u in enumerate(event_times):
        n_k = int(np.sum(t >= u))
        d_k = int(np.sum((t == u) & (e == 1)))
        s *= 1.0 - d_k / n_k
        at_risk[k] = n_k
        events[k] = d_k
        surv[k] = s
    return KMCurve(times=event_times, survival=surv, at_risk=at_risk, events=events)


@dataclass
class LogRankResult:
    statistic: float
    df: int
    p_value: float


def logrank_k(t, e, groups) -> LogRankResult:
    """k-sample log-rank test of equal survival across groups.

    Uses the classic chi-square approximation sum_g (O_g - E_g)^2 / E_g with
    per-group observed and expected event totals, which is conservative for
    balanced groups (the full covariance form is not implemented).
    """
    t, e, groups = _aligned(t, e, groups)
    labels = np.unique(groups)
    if labels.size < 2:
        raise ValueError("log-rank needs at least two non-empty groups")
    event_times = np.unique(t[e == 1])
    observed = np.zeros(labels.size)
    expected = np.zeros(labels.size)
    for u in event_times:
        at_risk = t >= u
        n = at_risk.sum()
        d = np.sum((t == u) & (e == 1))
        for g, lab in enumerate(labels):
            in_g = groups == lab
            observed[g] += np.sum((t == u) & (e == 1) & in_g)
            expected[g] += (at_risk & in_g).sum() * d / n
    valid = expected > 0
    statistic = float(np.sum((observed[valid] - expected[valid]) ** 2 / expected[valid]))
    df = int(labels.size - 1)
    return LogRankResult(statistic=statistic, df=df, p_value=chi2_sf(statistic, df))
