"""Variational inference for a Dirichlet-process Gaussian mixture.

Fits a truncated stick-breaking mixture of full-covariance Gaussians by
coordinate ascent on the evidence lower bound (ELBO):

* mixture weights get a stick-breaking prior ``v_k ~ Beta(1, alpha)`` with
  Beta variational posteriors,
* each component gets a conjugate Normal-Wishart prior
  ``Lambda_k ~ Wishart(V^-1, n)``, ``mu_k | Lambda_k ~ N(mu_0, (tau Lambda_k)^-1)``
  with Normal-Wishart posteriors,
* the E-step computes responsibilities from the usual expected
  log-weights / log-densities, the M-step updates the posteriors in closed
  form, and the full ELBO is evaluated every iteration.

The fitted point model keeps the expected weights, posterior means, and
normalized covariances ``scatter_k / dof_k``; scoring uses the plain
plug-in mixture density ``log sum_k pi_k N(x | mu_k, Sigma_k)`` evaluated
through Cholesky factors with log-sum-exp.

Everything is deterministic given the config seed.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import betaln, digamma, logsumexp, multigammaln

from .errors import NumericError

_log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)

# slack for the per-sample ELBO monotonicity assertion
ELBO_SLACK = 1e-8

# keeps effectively-empty components numerically alive, as is conventional
_NK_FLOOR = 10.0 * np.finfo(np.float64).eps


@dataclass(frozen=True)
class Priors:
    """Prior hyperparameters; ``None`` fields are derived from the data.

    Defaults follow common weakly-informative practice: concentration
    ``1 / max_components``, mean prior at the empirical mean with unit
    precision, Wishart degrees of freedom equal to the dimensionality, and
    the (regularized) empirical covariance as the Wishart scale.
    """

    alpha: float | None = None
    mean_prior: np.ndarray | None = None
    mean_precision: float = 1.0
    wishart_scale: np.ndarray | None = None
    wishart_dof: float | None = None

    def materialize(self, X: np.ndarray, max_components: int, reg_covar: float) -> "Priors":
        """Fill in data-derived defaults and validate against ``X``."""
        n, d = X.shape
        alpha = 1.0 / max_components if self.alpha is None else float(self.alpha)
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        if self.mean_precision <= 0:
            raise ValueError(f"mean_precision must be positive, got {self.mean_precision}")
        mean_prior = X.mean(axis=0) if self.mean_prior is None else np.asarray(
            self.mean_prior, dtype=np.float64
        )
        if mean_prior.shape != (d,):
            raise ValueError(f"mean_prior has shape {mean_prior.shape}, expected ({d},)")
        dof = float(d) if self.wishart_dof is None else float(self.wishart_dof)
        if dof < d:
            raise ValueError(f"wishart_dof must be >= dimension {d}, got {dof}")
        if self.wishart_scale is None:
            scale = np.atleast_2d(np.cov(X.T, bias=True)).astype(np.float64)
            scale[np.diag_indices(d)] += reg_covar
        else:
            scale = np.asarray(self.wishart_scale, dtype=np.float64)
        if scale.shape != (d, d):
            raise ValueError(f"wishart_scale has shape {scale.shape}, expected ({d}, {d})")
        if not np.allclose(scale, scale.T, atol=1e-10):
            raise ValueError("wishart_scale must be symmetric")
        try:
            np.linalg.cholesky(scale)
        except np.linalg.LinAlgError:
            raise NumericError(
                "wishart_scale is not positive definite; the data may be "
                "degenerate, try a larger reg_covar"
            ) from None
        return Priors(
            alpha=alpha,
            mean_prior=mean_prior,
            mean_precision=float(self.mean_precision),
            wishart_scale=scale,
            wishart_dof=dof,
        )


@dataclass(frozen=True)
class FitConfig:
    """Knobs for one fit; identical config + data reproduces the model bit
    for bit."""

    max_components: int = 10
    tol: float = 1e-3
    max_iter: int = 100
    seed: int = 0
    reg_covar: float = 1e-6
    init: str = "kmeans"  # "kmeans" | "random"

    def __post_init__(self):
        if self.max_components < 1:
            raise ValueError("max_components must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.reg_covar < 0:
            raise ValueError("reg_covar must be non-negative")
        if self.init not in ("kmeans", "random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class MixtureModel:
    """A fitted mixture: plug-in parameters plus fit diagnostics.

    ``cov_cholesky`` holds the lower-triangular factors of ``covariances``;
    ``precision_factor`` holds the upper-triangular ``(L^-1)^T`` per
    component, so density quadratic forms reduce to elementwise products
    and fixed-order sums whose bits do not depend on how many points are
    evaluated together.  Diagnostics (``elbo``, ``n_iter``, ``converged``,
    ``elbo_path``) describe the fit that produced the model and are not
    persisted by the model file format.
    """

    dim: int
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, dim)
    covariances: np.ndarray  # (K, dim, dim)
    cov_cholesky: np.ndarray = field(repr=False, default=None)
    precision_factor: np.ndarray = field(repr=False, default=None)
    elbo: float | None = None
    n_iter: int | None = None
    converged: bool | None = None
    elbo_path: tuple = field(repr=False, default=())

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_arrays(cls, weights, means, covariances, **diagnostics) -> "MixtureModel":
        """Build and validate a model from plain arrays (e.g. a loaded file).

        Checks weight normalization, shape consistency, finiteness, and
        positive definiteness (by factorizing the covariances).
        """
        weights = np.asarray(weights, dtype=np.float64)
        means = np.asarray(means, dtype=np.float64)
        covariances = np.asarray(covariances, dtype=np.float64)
        if weights.ndim != 1 or means.ndim != 2 or covariances.ndim != 3:
            raise ValueError("weights/means/covariances have wrong ranks")
        k, d = means.shape
        if weights.shape != (k,) or covariances.shape != (k, d, d):
            raise ValueError("weights/means/covariances shapes are inconsistent")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(means))
                and np.all(np.isfinite(covariances))):
            raise ValueError("mixture parameters must be finite")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-8:
            raise ValueError(
                f"weights must be non-negative and sum to 1, got sum {weights.sum()!r}"
            )
        try:
            chol = np.linalg.cholesky(covariances)
        except np.linalg.LinAlgError:
            raise NumericError("covariance matrix is not positive definite") from None
        eye = np.eye(d)
        factor = np.stack(
            [solve_triangular(chol[j], eye, lower=True).T for j in range(k)]
        )
        return cls(
            dim=d, weights=weights, means=means, covariances=covariances,
            cov_cholesky=chol, precision_factor=factor, **diagnostics,
        )


def _check_data(data) -> np.ndarray:
    """Accept an (n, d) array or a sequence of in-support projected features."""
    if isinstance(data, np.ndarray):
        X = np.asarray(data, dtype=np.float64)
    else:
        rows = []
        for item in data:
            values = getattr(item, "values", item)
            if getattr(item, "out_of_support", False):
                raise ValueError("out-of-support feature passed to fit")
            rows.append(np.asarray(values, dtype=np.float64))
        if rows and any(r.shape != rows[0].shape for r in rows):
            raise ValueError("feature vectors have mismatched dimensions")
        X = np.array(rows, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"data must be a non-empty 2-d array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contains non-finite values")
    return X


def _kmeans_responsibilities(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Hard one-hot responsibilities from a small deterministic k-means.

    Seeding is k-means++ style; Lloyd iterations run until the assignment is
    stable.  Empty clusters are left empty, which the variational updates
    handle by collapsing those components onto the prior.
    """
    n, d = X.shape
    centers = np.empty((k, d))
    centers[0] = X[rng.integers(n)]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[j:] = X[rng.integers(0, n, size=k - j)]
            break
        centers[j] = X[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, ((X - centers[j]) ** 2).sum(axis=1))

    labels = None
    for _ in range(100):
        d2 = (
            (X ** 2).sum(axis=1)[:, None]
            - 2.0 * X @ centers.T
            + (centers ** 2).sum(axis=1)[None, :]
        )
        new_labels = d2.argmin(axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = X[members].mean(axis=0)

    resp = np.zeros((n, k))
    resp[np.arange(n), labels] = 1.0
    return resp


def _random_responsibilities(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    resp = rng.random((n, k))
    resp /= resp.sum(axis=1, keepdims=True)
    return resp


def _sufficient_stats(X, resp, reg_covar):
    """Responsibility-weighted counts, means, and scatter matrices.

    The per-component scatter gets ``reg_covar`` added on its diagonal,
    which keeps posterior scale matrices positive definite on rank-deficient
    data (normalized block features always are: coordinates sum to one).
    """
    n, d = X.shape
    nk = resp.sum(axis=0) + _NK_FLOOR
    xbar = (resp.T @ X) / nk[:, None]
    k = resp.shape[1]
    scatter = np.empty((k, d, d))
    for j in range(k):
        diff = X - xbar[j]
        scatter[j] = ((resp[:, j][:, None] * diff).T @ diff) / nk[j]
        scatter[j][np.diag_indices(d)] += reg_covar
    return nk, xbar, scatter


@dataclass
class _Posterior:
    """Variational posterior state for all components."""

    stick_a: np.ndarray  # (K,)  Beta posterior first parameter
    stick_b: np.ndarray  # (K,)  Beta posterior second parameter
    beta: np.ndarray  # (K,)   mean precision scale
    m: np.ndarray  # (K, D)    mean location
    dof: np.ndarray  # (K,)    Wishart degrees of freedom
    inv_scale: np.ndarray  # (K, D, D)  inverse Wishart scale (accumulated scatter)
    chol_inv_scale: np.ndarray  # (K, D, D) lower Cholesky factors of inv_scale

    def expected_log_weights(self) -> np.ndarray:
        dig_sum = digamma(self.stick_a + self.stick_b)
        log_v = digamma(self.stick_a) - dig_sum
        log_1mv = digamma(self.stick_b) - dig_sum
        return log_v + np.concatenate(([0.0], np.cumsum(log_1mv)[:-1]))

    def expected_log_det_precision(self) -> np.ndarray:
        k, d = self.m.shape
        dig = digamma(0.5 * (self.dof[:, None] - np.arange(d)[None, :])).sum(axis=1)
        log_det_inv = 2.0 * np.log(
            np.diagonal(self.chol_inv_scale, axis1=1, axis2=2)
        ).sum(axis=1)
        return dig + d * math.log(2.0) - log_det_inv


def _m_step(priors: Priors, nk, xbar, scatter) -> _Posterior:
    k, d = xbar.shape
    tail = np.concatenate((np.cumsum(nk[::-1])[-2::-1], [0.0]))
    stick_a = 1.0 + nk
    stick_b = priors.alpha + tail
    beta = priors.mean_precision + nk
    m = (priors.mean_precision * priors.mean_prior + nk[:, None] * xbar) / beta[:, None]
    dof = priors.wishart_dof + nk
    inv_scale = np.empty((k, d, d))
    for j in range(k):
        diff = xbar[j] - priors.mean_prior
        inv_scale[j] = (
            priors.wishart_scale
            + nk[j] * scatter[j]
            + (priors.mean_precision * nk[j] / beta[j]) * np.outer(diff, diff)
        )
    try:
        chol = np.linalg.cholesky(inv_scale)
    except np.linalg.LinAlgError:
        raise NumericError(
            "posterior scale matrix lost positive definiteness; "
            "increase reg_covar"
        ) from None
    return _Posterior(stick_a, stick_b, beta, m, dof, inv_scale, chol)


def _e_step(X: np.ndarray, post: _Posterior):
    """Log responsibilities and per-sample normalizers for the current state."""
    n, d = X.shape
    k = post.m.shape[0]
    log_gauss = np.empty((n, k))
    for j in range(k):
        z = solve_triangular(post.chol_inv_scale[j], (X - post.m[j]).T, lower=True)
        maha = (z ** 2).sum(axis=0)
        log_gauss[:, j] = -0.5 * (d / post.beta[j] + post.dof[j] * maha)
    log_rho = (
        post.expected_log_weights()[None, :]
        + 0.5 * post.expected_log_det_precision()[None, :]
        - 0.5 * d * LOG_2PI
        + log_gauss
    )
    log_norm = logsumexp(log_rho, axis=1)
    log_resp = log_rho - log_norm[:, None]
    return log_resp, log_norm


def _trace_prod_with_precision(sym: np.ndarray, chol_inv_scale: np.ndarray) -> float:
    """``trace(sym @ W)`` where ``W = inv_scale^-1``, via the Cholesky factor."""
    a = solve_triangular(chol_inv_scale, sym, lower=True)
    b = solve_triangular(chol_inv_scale, a.T, lower=True)
    return float(np.trace(b))


def _mahalanobis_precision(vec: np.ndarray, chol_inv_scale: np.ndarray) -> float:
    """``vec^T W vec`` where ``W = inv_scale^-1``."""
    z = solve_triangular(chol_inv_scale, vec, lower=True)
    return float((z ** 2).sum())


def _log_wishart_norm(log_det_inv_scale, dof, d):
    # normalizer of Wishart(W, dof) with W given through log det W^-1
    return (
        0.5 * dof * log_det_inv_scale
        - 0.5 * dof * d * math.log(2.0)
        - multigammaln(0.5 * dof, d)
    )


def _elbo(priors: Priors, post: _Posterior, nk, xbar, scatter, log_resp) -> float:
    """Full evidence lower bound at the current (responsibilities, posterior).

    Evaluated right after an M-step with the responsibilities that fed it,
    where coordinate ascent guarantees the sequence is non-decreasing (up to
    the covariance regularization and float error).
    """
    k, d = post.m.shape
    n = log_resp.shape[0]

    log_pi = post.expected_log_weights()
    log_det_lambda = post.expected_log_det_precision()
    dig_sum = digamma(post.stick_a + post.stick_b)
    log_v = digamma(post.stick_a) - dig_sum
    log_1mv = digamma(post.stick_b) - dig_sum

    # E[log p(X | Z, mu, Lambda)]
    trace_sw = np.empty(k)
    maha_xbar = np.empty(k)
    for j in range(k):
        trace_sw[j] = _trace_prod_with_precision(scatter[j], post.chol_inv_scale[j])
        maha_xbar[j] = _mahalanobis_precision(xbar[j] - post.m[j], post.chol_inv_scale[j])
    p_x = 0.5 * np.sum(
        nk * (log_det_lambda - d / post.beta - post.dof * (trace_sw + maha_xbar) - d * LOG_2PI)
    )

    # E[log p(Z | v)] and E[log p(v)]
    p_z = float(np.sum(nk * log_pi))
    p_v = float(np.sum(math.log(priors.alpha) + (priors.alpha - 1.0) * log_1mv))

    # E[log p(mu, Lambda)]
    maha_m = np.empty(k)
    trace_vw = np.empty(k)
    for j in range(k):
        maha_m[j] = _mahalanobis_precision(post.m[j] - priors.mean_prior, post.chol_inv_scale[j])
        trace_vw[j] = _trace_prod_with_precision(priors.wishart_scale, post.chol_inv_scale[j])
    log_det_prior_inv_scale = 2.0 * np.log(
        np.diag(np.linalg.cholesky(priors.wishart_scale))
    ).sum()
    p_mu = 0.5 * np.sum(
        d * math.log(priors.mean_precision / (2.0 * math.pi))
        + log_det_lambda
        - d * priors.mean_precision / post.beta
        - priors.mean_precision * post.dof * maha_m
    )
    p_lambda = (
        k * _log_wishart_norm(log_det_prior_inv_scale, priors.wishart_dof, d)
        + 0.5 * (priors.wishart_dof - d - 1.0) * log_det_lambda.sum()
        - 0.5 * float(np.sum(post.dof * trace_vw))
    )

    # -E[log q(Z)] - E[log q(v)] - E[log q(mu, Lambda)]
    resp = np.exp(log_resp)
    q_z = float(np.sum(resp * log_resp))
    q_v = float(
        np.sum(
            (post.stick_a - 1.0) * log_v
            + (post.stick_b - 1.0) * log_1mv
            - betaln(post.stick_a, post.stick_b)
        )
    )
    log_det_inv_scale = 2.0 * np.log(
        np.diagonal(post.chol_inv_scale, axis1=1, axis2=2)
    ).sum(axis=1)
    wishart_entropy = (
        -_log_wishart_norm(log_det_inv_scale, post.dof, d)
        - 0.5 * (post.dof - d - 1.0) * log_det_lambda
        + 0.5 * post.dof * d
    )
    q_mu_lambda = float(
        np.sum(
            0.5 * log_det_lambda
            + 0.5 * d * np.log(post.beta / (2.0 * math.pi))
            - 0.5 * d
            - wishart_entropy
        )
    )

    return (p_x + p_z + p_v + p_mu + p_lambda - q_z - q_v - q_mu_lambda) / n


def _point_estimates(post: _Posterior):
    """Plug-in mixture parameters from the posterior state."""
    expected_v = post.stick_a / (post.stick_a + post.stick_b)
    weights = expected_v * np.concatenate(([1.0], np.cumprod(1.0 - expected_v)[:-1]))
    weights /= weights.sum()
    covariances = post.inv_scale / post.dof[:, None, None]
    covariances = 0.5 * (covariances + covariances.transpose(0, 2, 1))
    return weights, post.m.copy(), covariances


def fit(data, priors: Priors | None = None, cfg: FitConfig | None = None) -> MixtureModel:
    """Fit the mixture to ``data`` (n_samples, n_features) by variational EM.

    Convergence is declared when the per-sample ELBO changes by less than
    ``cfg.tol`` between iterations; the bound is also asserted to be
    non-decreasing (slack ``1e-8``) on every fit.
    """
    X = _check_data(data)
    cfg = cfg or FitConfig()
    priors = (priors or Priors()).materialize(X, cfg.max_components, cfg.reg_covar)

    rng = np.random.default_rng(cfg.seed)
    if cfg.init == "kmeans":
        resp = _kmeans_responsibilities(X, cfg.max_components, rng)
    else:
        resp = _random_responsibilities(X.shape[0], cfg.max_components, rng)

    nk, xbar, scatter = _sufficient_stats(X, resp, cfg.reg_covar)
    post = _m_step(priors, nk, xbar, scatter)

    bound = -np.inf
    path = []
    converged = False
    n_iter = 0
    for n_iter in range(1, cfg.max_iter + 1):
        prev_bound = bound
        log_resp, _ = _e_step(X, post)
        nk, xbar, scatter = _sufficient_stats(X, np.exp(log_resp), cfg.reg_covar)
        post = _m_step(priors, nk, xbar, scatter)
        bound = _elbo(priors, post, nk, xbar, scatter, log_resp)
        path.append(bound)
        if np.isfinite(prev_bound) and bound < prev_bound - ELBO_SLACK:
            raise NumericError(
                f"lower bound decreased at iteration {n_iter} "
                f"({prev_bound!r} -> {bound!r})"
            )
        if abs(bound - prev_bound) < cfg.tol:
            converged = True
            break
    if not converged:
        _log.warning(
            "fit did not converge in %d iterations (last ELBO change %.3g)",
            cfg.max_iter, bound - prev_bound,
        )

    weights, means, covariances = _point_estimates(post)
    model = MixtureModel.from_arrays(
        weights, means, covariances,
        elbo=float(bound), n_iter=n_iter, converged=converged, elbo_path=tuple(path),
    )
    return model


def component_log_densities(model: MixtureModel, X: np.ndarray) -> np.ndarray:
    """Per-component Gaussian log densities, shape (n_samples, K).

    Evaluated through the precomputed precision factors with non-BLAS
    einsum: each point's value is the same bit pattern whether it is
    scored alone or inside any batch (BLAS solves/gemms do not promise
    that, and thresholding on exact score equality needs it).
    """
    n, d = X.shape
    out = np.empty((n, model.n_components))
    for j in range(model.n_components):
        diff = X - model.means[j]
        y = np.einsum("nd,de->ne", diff, model.precision_factor[j], optimize=False)
        quad = np.einsum("ne,ne->n", y, y, optimize=False)
        log_det = 2.0 * np.log(np.diag(model.cov_cholesky[j])).sum()
        out[:, j] = -0.5 * (d * LOG_2PI + log_det + quad)
    return out


def weighted_log_prob_many(model: MixtureModel, X) -> np.ndarray:
    """``log sum_k pi_k N(x | mu_k, Sigma_k)`` for each row of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise ValueError(f"expected (n, {model.dim}) data, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contains non-finite values")
    with np.errstate(divide="ignore"):  # zero weights are legal, log gives -inf
        log_weights = np.log(model.weights)
    return logsumexp(component_log_densities(model, X) + log_weights[None, :], axis=1)


def weighted_log_prob(model: MixtureModel, x) -> float:
    """Mixture log density of a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {x.shape}")
    return float(weighted_log_prob_many(model, x[None, :])[0])
