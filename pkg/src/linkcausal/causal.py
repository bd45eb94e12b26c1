"""Counterfactual imputation, treatment-effect draws, and accuracy metrics.

The estimand is the average treatment effect over the linked cases: for each
linked pair the observed outcome supplies one potential outcome and the
counterfactual is drawn from the outcome model with the treatment indicator
flipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linkage import NO_LINK
from .outcomes import mean_function

__all__ = [
    "AtelPosterior",
    "AccuracyReport",
    "counterfactual_draws",
    "impute_counterfactuals",
    "atel_draw",
    "compute_ppv_npv",
    "compute_mse",
]


@dataclass(frozen=True)
class AtelPosterior:
    """Post burn-in draws of the linked-case average treatment effect."""

    draws: np.ndarray
    mean: float
    q025: float
    q500: float
    q975: float

    @classmethod
    def from_draws(cls, draws) -> "AtelPosterior":
        draws = np.asarray(draws, dtype=np.float64)
        draws = draws[np.isfinite(draws)]
        if len(draws) == 0:
            raise ValueError("no finite effect draws available")
        lo, med, hi = np.quantile(draws, [0.025, 0.5, 0.975])  # linear interpolation
        return cls(draws=draws, mean=float(draws.mean()),
                   q025=float(lo), q500=float(med), q975=float(hi))


@dataclass(frozen=True)
class AccuracyReport:
    """Linkage and causal accuracy for one run against known truth."""

    ppv: float | None
    npv: float | None
    mse: float
    atel0: float


def counterfactual_draws(params, e_hat_j, w_j, rng) -> np.ndarray:
    """Draw y_miss ~ N(m(e_hat, 1 - w), sigma2) for each linked pair."""
    w_j = np.asarray(w_j, dtype=np.float64)
    means = mean_function(params, e_hat_j, 1.0 - w_j)
    return rng.normal(means, np.sqrt(params.sigma2))


def impute_counterfactuals(i_idx, j_idx, e_hat, w, params, rng) -> dict[int, float]:
    """Counterfactual outcomes for the linked File A records, keyed by i."""
    e_hat = np.asarray(e_hat, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    draws = counterfactual_draws(params, e_hat[j_idx], w[j_idx], rng)
    return {int(i): float(v) for i, v in zip(i_idx, draws)}


def atel_draw(y_obs, y_miss, w) -> float:
    """Average of T_i = y_i(1) - y_i(0) over the linked pairs.

    y_obs plays the role of the observed arm (treatment w), y_miss the
    flipped arm.
    """
    y_obs = np.asarray(y_obs, dtype=np.float64)
    y_miss = np.asarray(y_miss, dtype=np.float64)
    w = np.asarray(w)
    if len(y_obs) == 0:
        raise ValueError("the linked set is empty")
    effects = np.where(w == 1, y_obs - y_miss, y_miss - y_obs)
    return float(effects.mean())


def _modal_value(entry):
    # posterior_mode_links stores (q, frequency); plain ints also accepted
    return entry[0] if isinstance(entry, tuple) else entry


def compute_ppv_npv(modal_links: dict, true_links: dict, n_b: int):
    """Positive/negative predictive value of modal links against the truth.

    PPV: fraction of records with a true match whose modal link is correct.
    NPV: fraction of records without a true match declared no-link.
    Denominators are the truth counts; an empty denominator yields None.
    """
    match_total = 0
    match_hit = 0
    nonmatch_total = 0
    nonmatch_hit = 0
    for j in range(n_b):
        declared = _modal_value(modal_links.get(j, NO_LINK))
        if j in true_links:
            match_total += 1
            if declared == true_links[j]:
                match_hit += 1
        else:
            nonmatch_total += 1
            if declared == NO_LINK:
                nonmatch_hit += 1
    ppv = match_hit / match_total if match_total else None
    npv = nonmatch_hit / nonmatch_total if nonmatch_total else None
    return ppv, npv


def compute_mse(atel_draws, atel0: float) -> float:
    """Mean squared deviation of the post burn-in draws from the benchmark."""
    draws = np.asarray(atel_draws, dtype=np.float64)
    if len(draws) == 0:
        raise ValueError("need at least one post burn-in draw")
    return float(np.mean((draws - atel0) ** 2))
