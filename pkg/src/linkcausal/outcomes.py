"""Outcome models for linked and non-linked records, plus their samplers.

Linked outcomes follow y = m(e_hat, w) + eps with eps ~ N(0, sigma2), where
m(e, w) = m1(e) + m2(e) * w is either linear in the estimated propensity
score (parametric: m1 = b0 + b1 e, m2 = alpha) or built from a truncated
power spline basis in e with Bayesian Lasso shrinkage on the knot
coefficients.  Non-linked outcomes follow a single normal N(mu1, sigma1_sq).

All samplers perform one conjugate Gibbs block-update cycle and never mutate
their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "PositivityError",
    "PropensityFit",
    "fit_propensity",
    "ParametricOutcomeParams",
    "SplineOutcomeParams",
    "NoLinkParams",
    "spline_design_row",
    "spline_design_matrix",
    "parametric_design_matrix",
    "mean_function",
    "init_parametric_params",
    "init_spline_params",
    "init_nolink_params",
    "quantile_knots",
    "sample_parametric_params",
    "sample_spline_params",
    "sample_nolink_params",
    "outcome_log_likelihood_ratio",
    "llr_matrix",
    "gaussian_conditional_moments",
]

_EHAT_CLAMP = 1e-8
_IRLS_MAX_ITER = 50
_IRLS_TOL = 1e-8
_COEF_FLOOR = 1e-12  # |coefficient| floor in the inverse-Gaussian mean


class PositivityError(ValueError):
    """Raised when a treatment arm is empty (positivity violated)."""


@dataclass(frozen=True)
class PropensityFit:
    """Logistic MLE of treatment on covariates, with fitted scores for the
    records the model was fit on."""

    eta: np.ndarray  # length p + 1, intercept first
    converged: bool
    e_hat: dict[int, float]

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Propensity scores for rows of x (n, p), clamped into (0, 1)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        lin = self.eta[0] + x @ self.eta[1:]
        return np.clip(_logistic(lin), _EHAT_CLAMP, 1.0 - _EHAT_CLAMP)


def _logistic(v):
    out = np.empty_like(v, dtype=np.float64)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def logistic_log_likelihood_gradient(eta, x, w) -> np.ndarray:
    """Score X'(w - p) of the logistic log likelihood (intercept included)."""
    X = np.column_stack([np.ones(len(w)), np.asarray(x, dtype=np.float64)])
    p = _logistic(X @ np.asarray(eta, dtype=np.float64))
    return X.T @ (np.asarray(w, dtype=np.float64) - p)


def fit_propensity(x, w, ids=None) -> PropensityFit:
    """IRLS logistic MLE of the treatment on the covariates.

    Requires at least p + 2 records and both treatment arms present.  On
    quasi-separation the last iterate is kept with converged=False so an
    MCMC run can continue.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    w = np.asarray(w, dtype=np.float64)
    n, p = x.shape
    if n < p + 2:
        raise ValueError(f"propensity fit needs at least {p + 2} records, got {n}")
    if w.min() == w.max():
        raise PositivityError("only one treatment arm present in the linked set")
    X = np.column_stack([np.ones(n), x])
    eta = np.zeros(p + 1)
    converged = False
    for _ in range(_IRLS_MAX_ITER):
        prob = _logistic(X @ eta)
        weight = np.clip(prob * (1.0 - prob), 1e-10, None)
        hessian = (X * weight[:, None]).T @ X
        score = X.T @ (w - prob)
        try:
            step = np.linalg.solve(hessian, score)
        except np.linalg.LinAlgError:
            break
        eta = eta + step
        if np.abs(step).max() < _IRLS_TOL:
            converged = True
            break
    scores = np.clip(_logistic(X @ eta), _EHAT_CLAMP, 1.0 - _EHAT_CLAMP)
    keys = range(n) if ids is None else ids
    return PropensityFit(eta=eta, converged=converged,
                         e_hat={int(k): float(s) for k, s in zip(keys, scores)})


# --- outcome parameter containers ----------------------------------------


@dataclass(frozen=True)
class ParametricOutcomeParams:
    """m1(e) = beta0 + beta1 * e and m2(e) = alpha, residual variance sigma2."""

    beta0: float
    beta1: float
    alpha: float
    sigma2: float

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be > 0")


@dataclass(frozen=True)
class SplineOutcomeParams:
    """Truncated power basis coefficients with Bayesian Lasso latents.

    beta covers m1 (intercept, s polynomial terms, m knot terms); gamma
    covers m2 (same minus the intercept).  tau1_sq/tau2_sq and
    lambda1_sq/lambda2_sq are the scale-mixture shrinkage latents for the
    knot coefficients of m1 and m2 respectively.
    """

    beta: np.ndarray
    gamma: np.ndarray
    sigma2: float
    tau1_sq: np.ndarray
    tau2_sq: np.ndarray
    lambda1_sq: float
    lambda2_sq: float
    knots: np.ndarray

    def __post_init__(self):
        m = len(self.knots)
        s = len(self.gamma) - m
        if s < 1 or len(self.beta) != 1 + s + m:
            raise ValueError("beta must have length 1 + s + m and gamma length s + m")
        if len(self.tau1_sq) != m or len(self.tau2_sq) != m:
            raise ValueError("tau vectors must have one entry per knot")
        k = np.asarray(self.knots, dtype=np.float64)
        if m and (not (np.diff(k) > 0).all() or k[0] <= 0 or k[-1] >= 1):
            raise ValueError("knots must be strictly increasing inside (0, 1)")
        if self.sigma2 <= 0 or self.lambda1_sq <= 0 or self.lambda2_sq <= 0:
            raise ValueError("variance parameters must be > 0")
        if (np.asarray(self.tau1_sq) <= 0).any() or (np.asarray(self.tau2_sq) <= 0).any():
            raise ValueError("tau_sq latents must be > 0")

    @property
    def degree(self) -> int:
        return len(self.gamma) - len(self.knots)


@dataclass(frozen=True)
class NoLinkParams:
    """Marginal normal for outcomes without a link: N(mu1, sigma1_sq)."""

    mu1: float
    sigma1_sq: float

    def __post_init__(self):
        if self.sigma1_sq <= 0:
            raise ValueError("sigma1_sq must be > 0")


def init_parametric_params(a_sigma=1.0, b_sigma=1.0) -> ParametricOutcomeParams:
    """Prior-centered starting values (coefficients 0, sigma2 = b/a)."""
    return ParametricOutcomeParams(0.0, 0.0, 0.0, b_sigma / a_sigma)


def init_nolink_params(a_sigma1=1.0, b_sigma1=1.0) -> NoLinkParams:
    return NoLinkParams(0.0, b_sigma1 / a_sigma1)


def init_spline_params(s, knots, a_sigma=1.0, b_sigma=1.0,
                       r1=1.0, delta1=1.0, r2=1.0, delta2=1.0) -> SplineOutcomeParams:
    knots = np.asarray(knots, dtype=np.float64)
    m = len(knots)
    return SplineOutcomeParams(
        beta=np.zeros(1 + s + m),
        gamma=np.zeros(s + m),
        sigma2=b_sigma / a_sigma,
        tau1_sq=np.full(m, 2.0 * delta1 / r1),
        tau2_sq=np.full(m, 2.0 * delta2 / r2),
        lambda1_sq=r1 / delta1,
        lambda2_sq=r2 / delta2,
        knots=knots,
    )


def quantile_knots(e_hat: np.ndarray, m_knots: int) -> np.ndarray:
    """Equally spaced quantiles of the supplied scores, forced strictly
    increasing inside (0, 1)."""
    probs = np.arange(1, m_knots + 1) / (m_knots + 1)
    knots = np.quantile(np.asarray(e_hat, dtype=np.float64), probs)
    knots = np.clip(knots, 1e-6, 1.0 - 1e-6)
    for k in range(1, m_knots):  # break ties from clustered scores
        if knots[k] <= knots[k - 1]:
            knots[k] = min(knots[k - 1] + 1e-9, 1.0 - 1e-6 + k * 1e-12)
    return knots


# --- design matrices -------------------------------------------------------


def spline_design_row(e_hat: float, s: int, knots) -> tuple[np.ndarray, np.ndarray]:
    """Basis row for one score: (1, e, .., e^s, (e-k_1)_+^s, .., (e-k_m)_+^s)
    for m1, and the same without the leading 1 for m2."""
    knots = np.asarray(knots, dtype=np.float64)
    powers = np.power(e_hat, np.arange(1, s + 1))
    trunc = np.clip(e_hat - knots, 0.0, None) ** s
    row_m1 = np.concatenate(([1.0], powers, trunc))
    return row_m1, row_m1[1:]


def spline_design_matrix(e_hat: np.ndarray, w: np.ndarray, s: int, knots) -> np.ndarray:
    """Stacked rows [row_m1 | w * row_m2] matching the coefficient layout
    (beta, gamma)."""
    e_hat = np.asarray(e_hat, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    knots = np.asarray(knots, dtype=np.float64)
    powers = e_hat[:, None] ** np.arange(1, s + 1)
    trunc = np.clip(e_hat[:, None] - knots[None, :], 0.0, None) ** s
    base = np.column_stack([np.ones(len(e_hat)), powers, trunc])
    return np.column_stack([base, base[:, 1:] * w[:, None]])


def parametric_design_matrix(e_hat: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(len(e_hat)), e_hat, w])


def mean_function(params, e_hat, w) -> np.ndarray:
    """m1(e) + m2(e) * w under either outcome model."""
    e_hat = np.asarray(e_hat, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if isinstance(params, ParametricOutcomeParams):
        return params.beta0 + params.beta1 * e_hat + params.alpha * w
    design = spline_design_matrix(e_hat, w, params.degree, params.knots)
    return design @ np.concatenate([params.beta, params.gamma])


# --- conjugate updates -----------------------------------------------------


def gaussian_conditional_moments(design, y, prior_prec_diag, sigma2):
    """Posterior mean and covariance of coefficients with N(0, diag) prior
    precision and Gaussian likelihood at variance sigma2."""
    design = np.atleast_2d(np.asarray(design, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    prec = np.diag(np.asarray(prior_prec_diag, dtype=np.float64)) + design.T @ design / sigma2
    cov = np.linalg.inv(prec)
    cov = (cov + cov.T) / 2.0
    mean = cov @ (design.T @ y / sigma2)
    return mean, cov


def _draw_coefficients(design, y, prior_prec_diag, sigma2, rng):
    prec = np.diag(prior_prec_diag) + design.T @ design / sigma2
    chol = np.linalg.cholesky(prec)
    mean = np.linalg.solve(prec, design.T @ y / sigma2)
    noise = np.linalg.solve(chol.T, rng.standard_normal(len(mean)))
    return mean + noise


def _draw_inv_gamma(shape, rate, rng):
    return rate / rng.gamma(shape)


def sample_parametric_params(y, e_hat, w, sigma2, a_sigma, b_sigma,
                             rng) -> ParametricOutcomeParams:
    """One Gibbs cycle: (beta0, beta1, alpha) from the normal conditional
    given sigma2, then sigma2 from its inverse-gamma conditional.

    Priors: (beta0, beta1, alpha) ~ N(0, I), sigma2 ~ IG(a_sigma, b_sigma).
    Requires at least one linked record (callers skip this update otherwise).
    """
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise ValueError("sample_parametric_params requires at least one record")
    design = parametric_design_matrix(e_hat, w)
    coefs = _draw_coefficients(design, y, np.ones(3), sigma2, rng)
    resid = y - design @ coefs
    sigma2_new = _draw_inv_gamma(a_sigma + len(y) / 2.0,
                                 b_sigma + resid @ resid / 2.0, rng)
    return ParametricOutcomeParams(*coefs, sigma2_new)


def sample_spline_params(y, e_hat, w, state: SplineOutcomeParams,
                         a_sigma, b_sigma, r1, delta1, r2, delta2,
                         rng) -> SplineOutcomeParams:
    """One Gibbs cycle through the semi-parametric blocks.

    Order: coefficient block | sigma2, tau -> sigma2 | coefficients, tau ->
    1/tau_sq | coefficients, sigma2, lambda_sq (inverse-Gaussian) ->
    lambda_sq | tau_sq (gamma).  The inverse-Gaussian mean uses
    sqrt(lambda_sq * sigma2) / max(|coef|, 1e-12).
    """
    y = np.asarray(y, dtype=np.float64)
    s = state.degree
    m = len(state.knots)
    design = spline_design_matrix(e_hat, w, s, state.knots)

    prior_prec = np.concatenate([
        np.ones(1 + s),
        1.0 / (state.sigma2 * state.tau1_sq),
        np.ones(s),
        1.0 / (state.sigma2 * state.tau2_sq),
    ])
    coefs = _draw_coefficients(design, y, prior_prec, state.sigma2, rng)
    beta, gamma = coefs[: 1 + s + m], coefs[1 + s + m:]
    beta_pen, gamma_pen = beta[1 + s:], gamma[s:]

    resid = y - design @ coefs
    quad = (beta_pen ** 2 / state.tau1_sq).sum() + (gamma_pen ** 2 / state.tau2_sq).sum()
    sigma2 = _draw_inv_gamma(a_sigma + len(y) / 2.0 + m,
                             b_sigma + resid @ resid / 2.0 + quad / 2.0, rng)

    mean1 = np.sqrt(state.lambda1_sq * sigma2) / np.maximum(np.abs(beta_pen), _COEF_FLOOR)
    mean2 = np.sqrt(state.lambda2_sq * sigma2) / np.maximum(np.abs(gamma_pen), _COEF_FLOOR)
    tau1_sq = 1.0 / rng.wald(mean1, state.lambda1_sq)
    tau2_sq = 1.0 / rng.wald(mean2, state.lambda2_sq)

    lambda1_sq = rng.gamma(r1 + m, 1.0 / (delta1 + tau1_sq.sum() / 2.0))
    lambda2_sq = rng.gamma(r2 + m, 1.0 / (delta2 + tau2_sq.sum() / 2.0))

    return replace(state, beta=beta, gamma=gamma, sigma2=sigma2,
                   tau1_sq=tau1_sq, tau2_sq=tau2_sq,
                   lambda1_sq=lambda1_sq, lambda2_sq=lambda2_sq)


def sample_nolink_params(y_unlinked, state: NoLinkParams, a_sigma1, b_sigma1,
                         rng) -> NoLinkParams:
    """Conjugate cycle for the no-link model: mu1 | sigma1_sq then
    sigma1_sq | mu1.  An empty unlinked set yields prior draws."""
    y = np.asarray(y_unlinked, dtype=np.float64)
    n = len(y)
    prec = 1.0 + n / state.sigma1_sq
    mean = (y.sum() / state.sigma1_sq) / prec
    mu1 = rng.normal(mean, np.sqrt(1.0 / prec))
    dev = y - mu1
    sigma1_sq = _draw_inv_gamma(a_sigma1 + n / 2.0, b_sigma1 + dev @ dev / 2.0, rng)
    return NoLinkParams(mu1, sigma1_sq)


# --- likelihood ratios -----------------------------------------------------


def _normal_logpdf(x, mean, var):
    return -0.5 * (np.log(2.0 * np.pi * var) + (x - mean) ** 2 / var)


def outcome_log_likelihood_ratio(y_i, e_hat_j, w_j, params, nolink: NoLinkParams) -> float:
    """log f1(y_i | e_hat_j, w_j) - log f2(y_i) for one candidate pair.

    Returns 0 when params is None (two-stage mode: the outcome carries no
    linkage evidence) or when y_i is missing.
    """
    if params is None or y_i is None or (isinstance(y_i, float) and np.isnan(y_i)):
        return 0.0
    mean = float(mean_function(params, np.array([e_hat_j]), np.array([w_j]))[0])
    return float(_normal_logpdf(y_i, mean, params.sigma2)
                 - _normal_logpdf(y_i, nolink.mu1, nolink.sigma1_sq))


def llr_matrix(y, e_hat, w, params, nolink: NoLinkParams) -> np.ndarray:
    """(n_A, n_B) outcome log likelihood ratios; rows with missing y are 0."""
    y = np.asarray(y, dtype=np.float64)
    n_a, n_b = len(y), len(np.asarray(e_hat))
    if params is None:
        return np.zeros((n_a, n_b))
    means = mean_function(params, e_hat, w)  # per File B record
    diff = y[:, None] - means[None, :]
    out = -0.5 * (np.log(2.0 * np.pi * params.sigma2) + diff * diff / params.sigma2)
    out -= _normal_logpdf(y, nolink.mu1, nolink.sigma1_sq)[:, None]
    out[np.isnan(y)] = 0.0
    return out
