"""Bipartite linkage state, its marginal prior, and the Gibbs updates.

The assignment vector z follows the bipartite convention: z[j] = i in
[0, n_A) links File B record j to File A record i, and z[j] = n_A + j means
record j has no link.  The one-to-one constraint (no two j share an i) is an
invariant of every state this module produces.

Mixture likelihood for the agreement vectors: each field agrees with
probability theta_m[f] on linked pairs and theta_u[f] on non-linked pairs,
independently across fields, with Beta(a, b) priors on every component.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lgamma

import numpy as np

from ._kernels import z_chain, z_sweep

__all__ = [
    "LinkageState",
    "MixtureParams",
    "log_prior_z",
    "sample_mixture_params",
    "field_log_ratio_lut",
    "pair_log_weights",
    "gibbs_update_z",
    "sample_z_chain",
    "posterior_mode_links",
    "NO_LINK",
]

# Sentinel used in modal-link maps; inside z arrays no-link is n_a + j.
NO_LINK = -1


class LinkageState:
    """One-to-one assignment of File B records to File A records."""

    def __init__(self, z: np.ndarray, n_a: int):
        self.z = np.asarray(z, dtype=np.int64).copy()
        self.n_a = int(n_a)
        self.n_b = len(self.z)
        self.validate()

    @classmethod
    def empty(cls, n_a: int, n_b: int) -> "LinkageState":
        """All records unlinked."""
        return cls(n_a + np.arange(n_b, dtype=np.int64), n_a)

    @classmethod
    def from_links(cls, links: dict[int, int], n_a: int, n_b: int) -> "LinkageState":
        """Build a state from a {j: i} map; unlisted j are no-links."""
        z = n_a + np.arange(n_b, dtype=np.int64)
        for j, i in links.items():
            z[j] = i
        return cls(z, n_a)

    def validate(self):
        z = self.z
        linked = z < self.n_a
        if (z < 0).any() or (z[~linked] != self.n_a + np.nonzero(~linked)[0]).any():
            raise ValueError("no-link entries must equal n_a + j")
        ids = z[linked]
        if len(np.unique(ids)) != len(ids):
            raise ValueError("one-to-one violation: two records share a File A link")

    @property
    def n_ab(self) -> int:
        return int((self.z < self.n_a).sum())

    def linked_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """(i_indices, j_indices) of the currently linked pairs."""
        j = np.nonzero(self.z < self.n_a)[0]
        return self.z[j], j

    def taken_mask(self) -> np.ndarray:
        taken = np.zeros(self.n_a, dtype=np.bool_)
        i, _ = self.linked_pairs()
        taken[i] = True
        return taken

    def links(self) -> dict[int, int]:
        i, j = self.linked_pairs()
        return dict(zip(j.tolist(), i.tolist()))

    def copy(self) -> "LinkageState":
        return LinkageState(self.z, self.n_a)


@dataclass(frozen=True)
class MixtureParams:
    """Per-field agreement probabilities for the link and non-link components."""

    theta_m: np.ndarray
    theta_u: np.ndarray

    def __post_init__(self):
        tm = np.asarray(self.theta_m, dtype=np.float64)
        tu = np.asarray(self.theta_u, dtype=np.float64)
        if tm.shape != tu.shape or tm.ndim != 1:
            raise ValueError("theta_m and theta_u must be 1-d with equal length")
        if not ((tm > 0) & (tm < 1)).all() or not ((tu > 0) & (tu < 1)).all():
            raise ValueError("mixture probabilities must lie in the open (0, 1)")
        object.__setattr__(self, "theta_m", tm)
        object.__setattr__(self, "theta_u", tu)


def _log_beta(x: float, y: float) -> float:
    return lgamma(x) + lgamma(y) - lgamma(x + y)


def log_prior_z(state: LinkageState, alpha_pi: float, beta_pi: float,
                n_a: int | None = None, n_b: int | None = None) -> float:
    """Log prior of z with the match rate integrated out.

    log[(n_A - n_AB)! / n_A!] + log B(n_AB + a_pi, n_B - n_AB + b_pi)
    - log B(a_pi, b_pi), evaluated through log-gamma.
    """
    n_a = state.n_a if n_a is None else n_a
    n_b = state.n_b if n_b is None else n_b
    k = state.n_ab
    return (
        lgamma(n_a - k + 1.0)
        - lgamma(n_a + 1.0)
        + _log_beta(k + alpha_pi, n_b - k + beta_pi)
        - _log_beta(alpha_pi, beta_pi)
    )


def sample_mixture_params(comparisons, state: LinkageState, a: float, b: float,
                          rng: np.random.Generator) -> MixtureParams:
    """Conjugate Beta draws for theta_m, theta_u given the current links.

    The non-link component uses all n_A * n_B - n_AB pairs not linked under z.
    """
    i_idx, j_idx = state.linked_pairs()
    n_ab = len(i_idx)
    agree_m = comparisons.bits[i_idx, j_idx, :].sum(axis=0, dtype=np.int64)
    totals = comparisons.field_totals()
    agree_u = totals - agree_m
    pairs_u = comparisons.n_a * comparisons.n_b - n_ab
    theta_m = rng.beta(a + agree_m, b + (n_ab - agree_m))
    theta_u = rng.beta(a + agree_u, b + (pairs_u - agree_u))
    eps = 1e-12  # keep the open-interval invariant under float rounding
    return MixtureParams(np.clip(theta_m, eps, 1 - eps), np.clip(theta_u, eps, 1 - eps))


def field_log_ratio_lut(mix: MixtureParams) -> np.ndarray:
    """log likelihood ratio for each of the 2**F agreement patterns."""
    c1 = np.log(mix.theta_m) - np.log(mix.theta_u)
    c0 = np.log1p(-mix.theta_m) - np.log1p(-mix.theta_u)
    f_count = len(c1)
    pats = np.arange(1 << f_count, dtype=np.uint32)
    bits = (pats[:, None] >> np.arange(f_count)) & 1
    return bits @ c1 + (1 - bits) @ c0


def pair_log_weights(comparisons, mix: MixtureParams, outcome_llr=None) -> np.ndarray:
    """(n_b, n_a) log weights: comparison-field ratio plus outcome ratio.

    outcome_llr may be None (two-stage: ratio 1), an (n_a, n_b) array, or a
    callable (i, j) -> log ratio, which is materialized once.
    """
    lut = field_log_ratio_lut(mix)
    logw_t = lut[comparisons.patterns_t()]
    if outcome_llr is not None:
        if callable(outcome_llr):
            mat = np.empty((comparisons.n_a, comparisons.n_b))
            for i in range(comparisons.n_a):
                for j in range(comparisons.n_b):
                    mat[i, j] = outcome_llr(i, j)
            outcome_llr = mat
        logw_t = logw_t + np.asarray(outcome_llr, dtype=np.float64).T
    return np.ascontiguousarray(logw_t)


def gibbs_update_z(state: LinkageState, comparisons, mix: MixtureParams,
                   outcome_llr, alpha_pi: float, beta_pi: float,
                   rng: np.random.Generator) -> LinkageState:
    """One full-conditional sweep over z in fixed scan order.

    For record j with k links held by the other records, the candidate
    weights are: no-link 1, and for each File A record i not taken by
    another record,

        exp(outcome_llr[i, j]) * prod_f ratio_f(gamma_f_ij)
        * (k + alpha_pi) / ((n_A - k) * (n_B - k + beta_pi - 1)).

    Weights are handled in log space with max-subtraction.
    """
    logw_t = pair_log_weights(comparisons, mix, outcome_llr)
    new = state.copy()
    taken = new.taken_mask()
    uniforms = rng.random(new.n_b)
    z_sweep(new.z, taken, new.n_ab, logw_t, float(alpha_pi), float(beta_pi), uniforms)
    new.validate()
    return new


def sample_z_chain(comparisons, mix: MixtureParams, outcome_llr,
                   alpha_pi: float, beta_pi: float, iterations: int,
                   rng: np.random.Generator,
                   init: LinkageState | None = None,
                   chunk: int = 65536) -> np.ndarray:
    """Run a fixed-parameter z chain and return all states, (iterations, n_b).

    Useful for validating the sweep kernel against exact enumeration: the
    weights are hoisted once, so a million sweeps on a toy instance take
    seconds.
    """
    logw_t = pair_log_weights(comparisons, mix, outcome_llr)
    state = LinkageState.empty(comparisons.n_a, comparisons.n_b) if init is None else init.copy()
    taken = state.taken_mask()
    n_links = state.n_ab
    out = np.empty((iterations, comparisons.n_b), dtype=np.int32)
    done = 0
    while done < iterations:
        step = min(chunk, iterations - done)
        uniforms = rng.random((step, comparisons.n_b))
        n_links = z_chain(state.z, taken, n_links, logw_t,
                          float(alpha_pi), float(beta_pi), uniforms,
                          out[done:done + step])
        done += step
    state.validate()
    return out


def posterior_mode_links(z_draws: np.ndarray, n_a: int) -> dict[int, tuple[int, float]]:
    """Most frequent state per record over post burn-in draws.

    Returns {j: (q, frequency)} with q a File A index or NO_LINK.  Ties break
    toward the smallest File A index, with no-link ordered after all indices.
    """
    z_draws = np.asarray(z_draws)
    if z_draws.ndim != 2 or z_draws.shape[0] == 0:
        raise ValueError("need at least one post burn-in draw")
    n_draws, n_b = z_draws.shape
    modal = {}
    for j in range(n_b):
        counts = np.bincount(z_draws[:, j], minlength=n_a + n_b)
        q = int(np.argmax(counts))  # argmax takes the smallest index on ties
        freq = counts[q] / n_draws
        modal[j] = (NO_LINK if q >= n_a else q, float(freq))
    return modal
