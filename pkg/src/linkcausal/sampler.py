"""MCMC orchestration for the joint, two-stage, and known-link modes.

Per-iteration schedule (fixed for reproducibility):

1. impute missing outcomes from their posterior predictive,
2. re-fit propensity scores on the currently linked records,
3. sample the linked-outcome parameters (f1) and no-link parameters (f2),
4. sample the comparison-mixture parameters theta_m, theta_u,
5. update z (joint: with the outcome ratio; two-stage: ratio 1;
   known-link: z stays fixed at the supplied truth),
6. impute counterfactuals for the linked pairs and record the effect draw.

Chains are confined to a single thread; replications parallelize across
processes with independent seeded streams.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import causal, linkage, outcomes
from .linkage import NO_LINK, LinkageState, MixtureParams
from .records import RunConfig

__all__ = ["ChainError", "McmcTrace", "run_chain", "run_two_stage_pipeline",
           "load_trace_csv"]

_MAX_SKIP_FRACTION = 0.2


class ChainError(RuntimeError):
    """A run could not produce a usable trace."""


@dataclass(frozen=True)
class McmcTrace:
    """Per-iteration records of z, the effect draw, and parameter summaries."""

    mode: str
    seed: int
    iterations: int
    burn_in: int
    n_a: int
    n_b: int
    z_draws: np.ndarray          # (iterations, n_b) int32
    atel: np.ndarray             # (iterations,), NaN when no links
    n_links: np.ndarray          # (iterations,) int32
    params: dict                 # name -> (iterations,) array
    skipped_propensity: int
    missing_rows: np.ndarray     # File A rows whose outcome was imputed
    missing_draws: np.ndarray    # (iterations, n_missing)

    def post_burnin_z(self) -> np.ndarray:
        return self.z_draws[self.burn_in:]

    def post_burnin_atel(self) -> np.ndarray:
        return self.atel[self.burn_in:]

    def modal_links(self) -> dict[int, tuple[int, float]]:
        return linkage.posterior_mode_links(self.post_burnin_z(), self.n_a)

    def write_csv(self, path, z_every: int = 0):
        """Newline-delimited iteration records; optional z snapshots.

        Columns carry the run metadata so a trace file is self-describing.
        Floats use repr for lossless round-trips.
        """
        names = sorted(self.params)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["iteration", "burnin", "mode", "seed", "n_links", "atel"] + names
            )
            for t in range(self.iterations):
                writer.writerow(
                    [t, int(t < self.burn_in), self.mode, self.seed,
                     int(self.n_links[t]), repr(float(self.atel[t]))]
                    + [repr(float(self.params[name][t])) for name in names]
                )
        if z_every > 0:
            z_path = str(path) + ".z"
            with open(z_path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["iteration", "j", "z"])
                for t in range(0, self.iterations, z_every):
                    for j in range(self.n_b):
                        writer.writerow([t, j, int(self.z_draws[t, j])])


def load_trace_csv(path):
    """Read back a trace file: (mode, seed, burn-in rows dropped?) -> dict.

    Returns {"mode", "seed", "atel": post burn-in draws, "n_links", "all_atel"}.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ChainError(f"{path}: empty trace")
    atel_keep = [float(r["atel"]) for r in rows if r["burnin"] == "0"]
    return {
        "mode": rows[0]["mode"],
        "seed": int(rows[0]["seed"]),
        "atel": np.array(atel_keep),
        "all_atel": np.array([float(r["atel"]) for r in rows]),
        "n_links": np.array([int(r["n_links"]) for r in rows]),
    }


def _records_to_arrays(file_a, file_b):
    y = np.array([np.nan if rec.y is None else rec.y for rec in file_a])
    x = np.array([rec.x for rec in file_b], dtype=np.float64)
    w = np.array([rec.w for rec in file_b], dtype=np.int64)
    return y, x, w


def run_chain(file_a, file_b, comparisons, config: RunConfig,
              true_links: dict[int, int] | None = None,
              rng: np.random.Generator | None = None,
              propensity_override=None, label_guard: bool = True) -> McmcTrace:
    """Run one MCMC chain and return its trace.

    true_links is required in known_link mode (z stays fixed to it).
    propensity_override supplies fixed scores for every File B record and
    bypasses the per-iteration logistic fit; it exists for known-propensity
    designs and for exactness tests on instances too small to fit a logistic
    regression.  label_guard enforces theta_m >= theta_u componentwise after
    every mixture draw (identifiability of the two components); turn it off
    only when validating the raw kernel against exact enumeration, where the
    guard would distort a weakly identified posterior.
    """
    if config.mode == "known_link" and true_links is None:
        raise ValueError("known_link mode requires true_links")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    hyper = config.hyper
    y0, x, w = _records_to_arrays(file_a, file_b)
    n_a, n_b = len(file_a), len(file_b)
    if comparisons.n_a != n_a or comparisons.n_b != n_b:
        raise ValueError("comparison tensor does not match the input files")

    missing_rows = np.nonzero(np.isnan(y0))[0]
    y_cur = y0.copy()
    if config.mode == "known_link":
        state = LinkageState.from_links(true_links, n_a, n_b)
    else:
        state = LinkageState.empty(n_a, n_b)
    mix = MixtureParams(np.full(comparisons.f_count, 0.9),
                        np.full(comparisons.f_count, 0.1))
    theta_c = None
    if config.outcome_model == "parametric":
        theta_c = outcomes.init_parametric_params(hyper.a_sigma, hyper.b_sigma)
    nolink = outcomes.init_nolink_params(hyper.a_sigma1, hyper.b_sigma1)
    if propensity_override is not None:
        e_all = np.clip(np.asarray(propensity_override, dtype=np.float64),
                        1e-8, 1 - 1e-8)
        if len(e_all) != n_b:
            raise ValueError("propensity_override must give one score per File B record")
    else:
        e_all = None

    iters = config.iterations
    z_draws = np.empty((iters, n_b), dtype=np.int32)
    atel = np.full(iters, np.nan)
    n_links_trace = np.empty(iters, dtype=np.int32)
    param_names = ["theta_m_mean", "theta_u_mean", "mu1", "sigma1_sq", "sigma2"]
    if config.outcome_model == "parametric":
        param_names += ["beta0", "beta1", "alpha"]
    else:
        param_names += ["lambda1_sq", "lambda2_sq"]
    params_trace = {name: np.full(iters, np.nan) for name in param_names}
    missing_draws = np.empty((iters, len(missing_rows)))
    skipped = 0

    for t in range(iters):
        i_idx, j_idx = state.linked_pairs()

        # (1) posterior predictive draws for the missing outcomes
        if len(missing_rows):
            link_of = {int(i): int(j) for i, j in zip(i_idx, j_idx)}
            for r in missing_rows:
                jr = link_of.get(int(r))
                if jr is not None and theta_c is not None and e_all is not None:
                    mu = float(outcomes.mean_function(
                        theta_c, e_all[jr:jr + 1], w[jr:jr + 1])[0])
                    y_cur[r] = rng.normal(mu, np.sqrt(theta_c.sigma2))
                else:
                    y_cur[r] = rng.normal(nolink.mu1, np.sqrt(nolink.sigma1_sq))
            missing_draws[t] = y_cur[missing_rows]

        # (2) propensity scores from the current linked set
        theta_c_ok = True
        if propensity_override is None:
            try:
                fit = outcomes.fit_propensity(x[j_idx], w[j_idx])
                e_all = fit.predict(x)
            except ValueError:
                skipped += 1
                theta_c_ok = False  # keep previous eta/scores, hold theta_c

        # (3) outcome parameters for the linked (f1) and no-link (f2) parts
        if theta_c_ok and len(i_idx) > 0 and e_all is not None:
            e_linked = e_all[j_idx]
            if config.outcome_model == "spline":
                if theta_c is None:
                    knots = outcomes.quantile_knots(e_linked, config.spline.m_knots)
                    theta_c = outcomes.init_spline_params(
                        config.spline.s, knots, hyper.a_sigma, hyper.b_sigma,
                        hyper.r1, hyper.delta1, hyper.r2, hyper.delta2)
                theta_c = outcomes.sample_spline_params(
                    y_cur[i_idx], e_linked, w[j_idx], theta_c,
                    hyper.a_sigma, hyper.b_sigma,
                    hyper.r1, hyper.delta1, hyper.r2, hyper.delta2, rng)
            else:
                theta_c = outcomes.sample_parametric_params(
                    y_cur[i_idx], e_linked, w[j_idx], theta_c.sigma2,
                    hyper.a_sigma, hyper.b_sigma, rng)
        unlinked_mask = np.ones(n_a, dtype=bool)
        unlinked_mask[i_idx] = False
        nolink = outcomes.sample_nolink_params(
            y_cur[unlinked_mask], nolink, hyper.a_sigma1, hyper.b_sigma1, rng)

        # (4) mixture parameters, with the label-switching guard
        mix = linkage.sample_mixture_params(comparisons, state, hyper.a, hyper.b, rng)
        if label_guard:
            swap = mix.theta_m < mix.theta_u
            if swap.any():
                mix = MixtureParams(np.where(swap, mix.theta_u, mix.theta_m),
                                    np.where(swap, mix.theta_m, mix.theta_u))

        # (5) linkage update
        if config.mode != "known_link":
            if config.mode == "joint":
                outcome_mat = outcomes.llr_matrix(y_cur, e_all, w, theta_c, nolink) \
                    if e_all is not None else None
            else:
                outcome_mat = None
            state = linkage.gibbs_update_z(state, comparisons, mix, outcome_mat,
                                           hyper.alpha_pi, hyper.beta_pi, rng)
            i_idx, j_idx = state.linked_pairs()

        # (6) counterfactuals and the effect draw
        if len(i_idx) > 0 and theta_c is not None and e_all is not None:
            y_miss = causal.counterfactual_draws(theta_c, e_all[j_idx], w[j_idx], rng)
            atel[t] = causal.atel_draw(y_cur[i_idx], y_miss, w[j_idx])

        z_draws[t] = state.z
        n_links_trace[t] = len(i_idx)
        params_trace["theta_m_mean"][t] = mix.theta_m.mean()
        params_trace["theta_u_mean"][t] = mix.theta_u.mean()
        params_trace["mu1"][t] = nolink.mu1
        params_trace["sigma1_sq"][t] = nolink.sigma1_sq
        if theta_c is not None:
            params_trace["sigma2"][t] = theta_c.sigma2
            if config.outcome_model == "parametric":
                params_trace["beta0"][t] = theta_c.beta0
                params_trace["beta1"][t] = theta_c.beta1
                params_trace["alpha"][t] = theta_c.alpha
            else:
                params_trace["lambda1_sq"][t] = theta_c.lambda1_sq
                params_trace["lambda2_sq"][t] = theta_c.lambda2_sq

    if skipped > _MAX_SKIP_FRACTION * iters:
        raise ChainError(
            f"propensity fit failed in {skipped}/{iters} iterations (> 20%)")
    return McmcTrace(
        mode=config.mode, seed=config.seed, iterations=iters,
        burn_in=config.burn_in, n_a=n_a, n_b=n_b, z_draws=z_draws, atel=atel,
        n_links=n_links_trace, params=params_trace, skipped_propensity=skipped,
        missing_rows=missing_rows, missing_draws=missing_draws[:, :len(missing_rows)],
    )


def _resolve_collisions(modal: dict[int, tuple[int, float]]) -> dict[int, int]:
    """Turn per-record modal links into a one-to-one map.

    Per-record argmax can occasionally give two File B records the same
    File A record; the record with the higher posterior frequency keeps it
    (ties to the smaller j), the rest become no-links.
    """
    best: dict[int, tuple[float, int]] = {}
    for j in sorted(modal):
        q, freq = modal[j]
        if q == NO_LINK:
            continue
        if q not in best or freq > best[q][0]:
            best[q] = (freq, j)
    return {j: q for q, (_, j) in best.items()}


def run_two_stage_pipeline(file_a, file_b, comparisons, config: RunConfig):
    """Stage 1: link ignoring outcomes; stage 2: causal chain on the modal links.

    Returns (links, stage2_trace, stage1_trace); links is the one-to-one map
    the second stage conditioned on.
    """
    if config.mode != "two_stage":
        raise ValueError("run_two_stage_pipeline requires mode=two_stage")
    ss = np.random.SeedSequence(config.seed)
    rng1, rng2 = (np.random.default_rng(child) for child in ss.spawn(2))
    stage1 = run_chain(file_a, file_b, comparisons, config, rng=rng1)
    links = _resolve_collisions(stage1.modal_links())
    if not links:
        raise ChainError("stage 1 produced zero modal links; no causal stage possible")
    stage2 = run_chain(file_a, file_b, comparisons,
                       replace(config, mode="known_link"),
                       true_links=links, rng=rng2)
    return links, stage2, stage1
