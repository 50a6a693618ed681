"""Independent oracles, inequality validators, and sample-cloud demos.

Nothing here is used by the estimators themselves: these are
brute-force sums, numeric integrals, and closed-form cross-checks that
the fast paths are tested against, plus Monte Carlo validators for the
Gaussian and discrete divergence inequalities and two gradient-descent
demonstrations on sample clouds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import rng
from .divergences import (
    DiscreteDist,
    GaussianParams,
    discrete_cs,
    discrete_kl,
    empirical_cs,
    empirical_mmd_sq,
    gaussian_cs,
    gaussian_kl,
)
from .errors import CostGuardError, DimensionError
from .kernels import as_sample_matrix, check_width, gram
from .training import TrainConfig, cs_ib_loss

_NAIVE_CAP = 64


# ----------------------------------------------------------------------
# Grid densities and numeric integration
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class GridDensity:
    """Density sampled on a 1-D grid (or 2-D lattice), trapezoid-integrable."""

    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=np.float64) for a in self.axes)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)
        if len(axes) not in (1, 2):
            raise DimensionError("grids must be 1-D or 2-D")
        if values.shape != tuple(a.size for a in axes):
            raise DimensionError("values shape does not match the axes")
        if np.any(values < 0):
            raise ValueError("density values must be nonnegative")
        total = _integrate(values, axes)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"density integrates to {total}, not 1")

    @property
    def range_length(self) -> float:
        """Length (1-D) or area (2-D) of the integration range."""
        length = 1.0
        for axis in self.axes:
            length *= float(axis[-1] - axis[0])
        return length

    @classmethod
    def from_function(cls, fn, lo: float, hi: float, n: int) -> "GridDensity":
        axis = np.linspace(lo, hi, n)
        return cls((axis,), fn(axis))


def _integrate(values: np.ndarray, axes) -> float:
    out = values
    for dim in reversed(range(len(axes))):
        out = np.trapezoid(out, axes[dim], axis=dim)
    return float(out)


def gaussian_grid(mean: float, var: float, lo: float, hi: float, n: int) -> GridDensity:
    """Univariate Gaussian density on a uniform grid."""

    def pdf(x):
        return np.exp(-0.5 * (x - mean) ** 2 / var) / math.sqrt(2 * math.pi * var)

    return GridDensity.from_function(pdf, lo, hi, n)


def _check_grids(p: GridDensity, q: GridDensity) -> None:
    if len(p.axes) != len(q.axes) or any(
        a.shape != b.shape or not np.array_equal(a, b) for a, b in zip(p.axes, q.axes)
    ):
        raise DimensionError("grid densities must share the same grid")


def integrate_cs(p: GridDensity, q: GridDensity) -> float:
    """Trapezoid-rule CS divergence (canonical convention)."""
    _check_grids(p, q)
    cross = _integrate(p.values * q.values, p.axes)
    if cross <= 0.0:
        return math.inf
    self_p = _integrate(p.values**2, p.axes)
    self_q = _integrate(q.values**2, q.axes)
    return math.log(self_p) + math.log(self_q) - 2.0 * math.log(cross)


def integrate_kl(p: GridDensity, q: GridDensity) -> float:
    """Trapezoid-rule KL divergence; inf when p escapes q's support."""
    _check_grids(p, q)
    mask = p.values > 0
    if np.any(q.values[mask] == 0.0):
        return math.inf
    integrand = np.zeros_like(p.values)
    integrand[mask] = p.values[mask] * np.log(p.values[mask] / q.values[mask])
    return _integrate(integrand, p.axes)


def integrate_holder(p: GridDensity, q: GridDensity, a: float) -> float:
    """Trapezoid-rule Hoelder divergence with exponent a > 1 (b = a/(a-1)).

    At a = 2 this equals half the canonical CS value.
    """
    if a <= 1.0:
        raise ValueError(f"exponent must exceed 1, got {a}")
    _check_grids(p, q)
    b = a / (a - 1.0)
    cross = _integrate(p.values * q.values, p.axes)
    if cross <= 0.0:
        return math.inf
    norm_p = _integrate(p.values**a, p.axes) ** (1.0 / a)
    norm_q = _integrate(q.values**b, q.axes) ** (1.0 / b)
    return -math.log(cross / (norm_p * norm_q))


def validate_prop5(p: GridDensity, q: GridDensity) -> dict:
    """General CS-vs-KL bound report on grid densities.

    lhs = C1 [D_cs - log|K| + 2 log C2] against rhs = D_kl, where |K| is
    the integration-range length, C1 the (approximately unit) p-mass and
    C2 the mass-to-energy ratio.  Reports, never asserts.
    """
    _check_grids(p, q)
    c1 = _integrate(p.values, p.axes)
    energy = _integrate(p.values**2, p.axes) * _integrate(q.values**2, q.axes)
    c2 = c1 / energy**0.25
    d_cs = integrate_cs(p, q)
    d_kl = integrate_kl(p, q)
    if math.isinf(d_cs):
        lhs = math.inf
    else:
        lhs = c1 * (d_cs - math.log(p.range_length) + 2.0 * math.log(c2))
    return {
        "lhs": lhs,
        "rhs": d_kl,
        "C1": c1,
        "C2": c2,
        "holds": bool(lhs <= d_kl or math.isinf(d_kl)),
    }


# ----------------------------------------------------------------------
# Literal-sum oracles (cost-guarded)
# ----------------------------------------------------------------------


def _guard(n: int) -> None:
    if n > _NAIVE_CAP:
        raise CostGuardError(f"naive oracle capped at N={_NAIVE_CAP}, got {n}")


def naive_pairwise_sqdist(a, b) -> np.ndarray:
    a = as_sample_matrix(a, "a")
    b = as_sample_matrix(b, "b")
    _guard(max(a.shape[0], b.shape[0]))
    out = np.zeros((a.shape[0], b.shape[0]))
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            acc = 0.0
            for k in range(a.shape[1]):
                diff = a[i, k] - b[j, k]
                acc += diff * diff
            out[i, j] = acc
    return out


def _kernel(u, v, sigma: float) -> float:
    acc = 0.0
    for uk, vk in zip(u, v):
        acc += (uk - vk) ** 2
    return math.exp(-acc / (2.0 * sigma * sigma))


def naive_mmd_sq(a, b, sigma: float = 1.0) -> float:
    """MMD^2 by pointwise kernel sums, no Gram matrices."""
    a = as_sample_matrix(a, "a")
    b = as_sample_matrix(b, "b")
    _guard(max(a.shape[0], b.shape[0]))
    sigma = check_width(sigma)
    m, n = a.shape[0], b.shape[0]
    self_a = sum(_kernel(a[i], a[j], sigma) for i in range(m) for j in range(m))
    self_b = sum(_kernel(b[i], b[j], sigma) for i in range(n) for j in range(n))
    cross = sum(_kernel(a[i], b[j], sigma) for i in range(m) for j in range(n))
    return self_a / m**2 + self_b / n**2 - 2.0 * cross / (m * n)


def naive_cs_qmi(x, t, sigma_x: float = 1.0, sigma_t: float = 1.0) -> float:
    """CS-QMI by literal triple/quadruple index sums."""
    x = as_sample_matrix(x, "x")
    t = as_sample_matrix(t, "t")
    if x.shape[0] != t.shape[0]:
        raise DimensionError("x and t must have equal row counts")
    n = x.shape[0]
    _guard(n)
    k = gram(x, x, sigma_x)
    q = gram(t, t, sigma_t)
    term_joint = 0.0
    for i in range(n):
        for j in range(n):
            term_joint += k[i, j] * q[i, j]
    term_product = 0.0
    for i in range(n):
        for j in range(n):
            for a in range(n):
                for b in range(n):
                    term_product += k[i, j] * q[a, b]
    term_cross = 0.0
    for i in range(n):
        for j in range(n):
            for a in range(n):
                term_cross += k[i, j] * q[i, a]
    return (
        math.log(term_joint / n**2)
        + math.log(term_product / n**4)
        - 2.0 * math.log(term_cross / n**3)
    )


def naive_hsic(x, t, sigma_x: float = 1.0, sigma_t: float = 1.0) -> float:
    """Biased HSIC by the three-sum form, literal loops."""
    x = as_sample_matrix(x, "x")
    t = as_sample_matrix(t, "t")
    if x.shape[0] != t.shape[0]:
        raise DimensionError("x and t must have equal row counts")
    n = x.shape[0]
    _guard(n)
    k = gram(x, x, sigma_x)
    q = gram(t, t, sigma_t)
    term_joint = 0.0
    for i in range(n):
        for j in range(n):
            term_joint += k[i, j] * q[i, j]
    term_product = 0.0
    for i in range(n):
        for j in range(n):
            for a in range(n):
                for b in range(n):
                    term_product += k[i, j] * q[a, b]
    term_cross = 0.0
    for i in range(n):
        for j in range(n):
            for a in range(n):
                term_cross += k[i, j] * q[i, a]
    return term_joint / n**2 + term_product / n**4 - 2.0 * term_cross / n**3


def naive_conditional_cs(x, y, y_hat, sigma_x: float = 1.0, sigma_y: float = 1.0) -> float:
    """Independent re-implementation of the conditional CS estimator."""
    x = as_sample_matrix(x, "x")
    y = as_sample_matrix(y, "y")
    y_hat = as_sample_matrix(y_hat, "y_hat")
    n = x.shape[0]
    _guard(n)
    term1 = term2 = term3 = 0.0
    for j in range(n):
        row = sum(_kernel(x[j], x[i], sigma_x) for i in range(n))
        inner1 = sum(
            _kernel(x[j], x[i], sigma_x) * _kernel(y[j], y[i], sigma_y) for i in range(n)
        )
        inner2 = sum(
            _kernel(x[j], x[i], sigma_x) * _kernel(y_hat[j], y_hat[i], sigma_y)
            for i in range(n)
        )
        inner3 = sum(
            _kernel(x[j], x[i], sigma_x) * _kernel(y_hat[j], y[i], sigma_y)
            for i in range(n)
        )
        term1 += inner1 / row**2
        term2 += inner2 / row**2
        term3 += inner3 / row**2
    return math.log(term1) + math.log(term2) - 2.0 * math.log(term3)


def naive_conditional_mmd(x, y, y_hat, sigma_x=1.0, sigma_y=1.0, ridge=0.1) -> float:
    """Conditional MMD via explicit matrix inverse and trace products."""
    x = as_sample_matrix(x, "x")
    _guard(x.shape[0])
    k = gram(x, x, sigma_x)
    inv = np.linalg.inv(k + ridge * np.eye(k.shape[0]))
    l_obs = gram(y, y, sigma_y)
    l_pred = gram(y_hat, y_hat, sigma_y)
    l_cross = gram(y_hat, y, sigma_y)
    return float(
        np.trace(k @ inv @ l_obs @ inv)
        + np.trace(k @ inv @ l_pred @ inv)
        - 2.0 * np.trace(k @ inv @ l_cross @ inv)
    )


def naive_nib_bound(centers, sigma: float) -> float:
    """Double-loop version of the KDE mutual-information bound."""
    h = as_sample_matrix(centers, "centers")
    _guard(h.shape[0])
    sigma = check_width(sigma)
    n = h.shape[0]
    total = 0.0
    for i in range(n):
        inner = sum(_kernel(h[i], h[j], sigma) for j in range(n))
        total += math.log(inner / n)
    return -total / n


# ----------------------------------------------------------------------
# Inequality validators
# ----------------------------------------------------------------------


def _random_gaussian(d: int, seed: int, *stream: int) -> GaussianParams:
    mean = rng.standard_normal(d, seed, *stream, 0)
    a = rng.standard_normal((d, d), seed, *stream, 1)
    return GaussianParams(mean, a.T @ a + 0.1 * np.eye(d))


def validate_theorem1(trials: int = 1000, dims=(1, 2, 5), seed: int = 0) -> int:
    """Count violations of halved D_cs <= min(KL(p;q), KL(q;p)) + 1e-9."""
    violations = 0
    for d in dims:
        for i in range(trials):
            p = _random_gaussian(d, seed, 51, d, i, 0)
            q = _random_gaussian(d, seed, 51, d, i, 1)
            cs = gaussian_cs(p, q, convention="halved")
            bound = min(gaussian_kl(p, q), gaussian_kl(q, p))
            if cs > bound + 1e-9:
                violations += 1
    return violations


def validate_corollary1(trials: int = 1000, seed: int = 0, dims=(1, 2, 5)) -> int:
    """Count violations of halved CS-QMI <= Shannon MI for joint Gaussians."""
    violations = 0
    for i in range(trials):
        d = dims[i % len(dims)]
        mean = rng.standard_normal(2 * d, seed, 52, i, 0)
        a = rng.standard_normal((2 * d, 2 * d), seed, 52, i, 1)
        cov = a.T @ a + 0.1 * np.eye(2 * d)
        block = np.zeros_like(cov)
        block[:d, :d] = cov[:d, :d]
        block[d:, d:] = cov[d:, d:]
        cs = gaussian_cs(GaussianParams(mean, cov), GaussianParams(mean, block), "halved")
        mutual_info = 0.5 * (
            _slogdet(cov[:d, :d]) + _slogdet(cov[d:, d:]) - _slogdet(cov)
        )
        if cs > mutual_info + 1e-9:
            violations += 1
    return violations


def _slogdet(m: np.ndarray) -> float:
    sign, val = np.linalg.slogdet(m)
    if sign <= 0:
        raise ValueError("matrix must have positive determinant")
    return float(val)


# Calibrated lower bounds on the D_cs <= D_kl fraction at 1000 trials.
# Observed over seeds 0..4 with normalized-uniform pairs: K=2 -> 1.000,
# K=3 -> 0.902..0.931, K=10 -> 0.996..0.999; frozen with margin.  The
# K=3 violations are genuine (confirmed at 50-digit precision), so the
# fraction sits near, not at, 1.
DISCRETE_MC_THRESHOLDS = {2: 0.995, 3: 0.85, 10: 0.98}


def monte_carlo_discrete(k: int, trials: int = 1000, seed: int = 0) -> float:
    """Fraction of random simplex pairs with D_cs <= D_kl.

    Pairs are normalized uniform draws (the simplest simplex sampler;
    the sampling law is a free choice and is noted in reports).
    """
    if k < 2:
        raise ValueError("need at least 2 states")
    hits = 0
    for i in range(trials):
        p = DiscreteDist.from_weights(rng.uniform(k, seed, 53, i, 0))
        q = DiscreteDist.from_weights(rng.uniform(k, seed, 53, i, 1))
        if discrete_cs(p, q) <= discrete_kl(p, q):
            hits += 1
    return hits / trials


def validate_forms(instances: int = 100, seed: int = 0, max_n: int = 32) -> int:
    """Count fast-vs-independent-form disagreements beyond 1e-10 relative.

    Covers: Gram-sum vs embedding-form CS, fast vs naive CS-QMI, and
    trace-form vs sum-form HSIC.
    """
    from .dependence import cs_qmi, hsic_biased
    from .divergences import empirical_cs_embedding_form

    violations = 0
    for i in range(instances):
        u = float(rng.uniform((), seed, 54, i, 0))
        n = 2 + int(u**3 * (max_n - 2))
        d = 1 + int(float(rng.uniform((), seed, 54, i, 1)) * 3)
        x = rng.standard_normal((n, d), seed, 54, i, 2)
        t = 0.5 * x + 0.5 * rng.standard_normal((n, d), seed, 54, i, 3)
        sx = 0.5 + 1.5 * float(rng.uniform((), seed, 54, i, 4))
        st = 0.5 + 1.5 * float(rng.uniform((), seed, 54, i, 5))
        pairs = (
            (empirical_cs(x, t, sx), empirical_cs_embedding_form(x, t, sx)),
            (cs_qmi(x, t, sx, st), naive_cs_qmi(x, t, sx, st)),
            (hsic_biased(x, t, sx, st), naive_hsic(x, t, sx, st)),
        )
        for fast, reference in pairs:
            if _rel_err(fast, reference) > 1e-10:
                violations += 1
    return violations


def _rel_err(a: float, b: float) -> float:
    # Relative error with the scale floored at 1: these identities combine
    # O(1) log/sum terms, so near-zero values are cancellation-dominated
    # and agreement is meaningful at the absolute machine-precision level.
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _min_relu_gap(model, x: np.ndarray, noise: np.ndarray) -> float:
    """Smallest |pre-activation| over all ReLU layers of one forward pass.

    Central differences are invalid across a ReLU kink, so the gradient
    validator only evaluates at points with a comfortable clearance.
    """
    gap = math.inf
    h = x
    for layer in model.encoder:
        pre = h @ layer.w + layer.b
        if layer.activation == "relu":
            gap = min(gap, float(np.min(np.abs(pre))))
            h = np.maximum(pre, 0.0)
        else:
            h = pre
    h = h + model.noise_std * noise
    for layer in model.decoder:
        pre = h @ layer.w + layer.b
        if layer.activation == "relu":
            gap = min(gap, float(np.min(np.abs(pre))))
            h = np.maximum(pre, 0.0)
        else:
            h = pre
    return gap


def validate_gradients(trials: int = 20, seed: int = 0, h: float = 1e-5) -> tuple:
    """Autodiff vs central finite differences on the full CS-IB loss.

    Returns (violations, worst relative error) over random small models;
    a parameter tensor counts as a violation above 1e-4 relative.
    Biases are jittered until every ReLU pre-activation clears the kink
    by a wide margin (zero-init biases otherwise park dead rows exactly
    on the kink, where central differences are wrong by construction).
    """
    from .nn import build_forward, init_model

    violations = 0
    worst = 0.0
    for trial in range(trials):
        n = 6 + int(float(rng.uniform((), seed, 55, trial, 0)) * 8)
        d = 2 + int(float(rng.uniform((), seed, 55, trial, 1)) * 2)
        beta = float(rng.uniform((), seed, 55, trial, 2))
        x = rng.standard_normal((n, d), seed, 55, trial, 3)
        y = rng.standard_normal((n, 1), seed, 55, trial, 4)
        for attempt in range(64):
            model = init_model(
                d, encoder_widths=(5, 4), decoder_widths=(4,), output_dim=1,
                seed=seed + trial, noise_init=0.1,
            )
            layers = model.encoder + model.decoder
            for li, layer in enumerate(layers):
                layer.b += 0.1 * rng.standard_normal(
                    layer.b.shape, seed, 55, trial, 6, attempt, li
                )
            noise = rng.standard_normal((n, model.latent_dim), seed, 55, trial, 5, attempt)
            if _min_relu_gap(model, x, noise) > 100.0 * h:
                break
        cfg = TrainConfig(beta=beta, batch_size=2, epochs=1)

        def loss_value(m) -> float:
            graph = build_forward(m, x, noise)
            return float(cs_ib_loss(x, y, graph.y_hat, graph.t, cfg).loss.value)

        graph = build_forward(model, x, noise)
        parts = cs_ib_loss(x, y, graph.y_hat, graph.t, cfg)
        ad.backward(parts.loss)
        grads = graph.gradients()
        for name, param in model.parameters().items():
            fd = np.zeros_like(param)
            flat = param.reshape(-1)
            fd_flat = fd.reshape(-1)
            for idx in range(flat.size):
                keep = flat[idx]
                flat[idx] = keep + h
                up = loss_value(model)
                flat[idx] = keep - h
                down = loss_value(model)
                flat[idx] = keep
                fd_flat[idx] = (up - down) / (2.0 * h)
            err = _tensor_rel_err(grads[name], fd)
            worst = max(worst, err)
            if err > 1e-4:
                violations += 1
    return violations, worst


def _tensor_rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-12)
    return float(np.linalg.norm(a - b)) / denom


# ----------------------------------------------------------------------
# Sample-cloud demonstrations
# ----------------------------------------------------------------------


@dataclass
class CloudTrajectory:
    d_cs: list = field(default_factory=list)
    mmd_sq: list = field(default_factory=list)
    movable: np.ndarray | None = None
    fixed: np.ndarray | None = None
    aborted: bool = False


def _mixture_sample(n: int, centers, seed: int, *stream: int) -> np.ndarray:
    centers = np.asarray(centers, dtype=np.float64)
    labels = rng.uniform(n, seed, *stream, 0) < 0.5
    base = rng.standard_normal((n, centers.shape[1]), seed, *stream, 1)
    return base + np.where(labels[:, None], centers[0], centers[1])


def demo_cloud_descent(
    centers=((4.0, 4.0), (-4.0, -4.0)),
    n_fixed: int = 400,
    n_opt: int = 200,
    lr: float = 10.0,
    steps: int = 150,
    sigma: float = 1.0,
    seed: int = 0,
) -> CloudTrajectory:
    """Gradient descent of a movable cloud under the empirical CS divergence.

    The fixed cloud is a two-Gaussian mixture; the movable cloud starts
    standard normal.  Per-step CS divergence and MMD^2 are logged; a
    non-finite loss aborts with the trajectory so far.
    """
    sigma = check_width(sigma)
    fixed = _mixture_sample(n_fixed, centers, seed, 81)
    movable = rng.standard_normal((n_opt, fixed.shape[1]), seed, 82)
    scale = -0.5 / sigma**2
    traj = CloudTrajectory(fixed=fixed)
    for _ in range(int(steps)):
        traj.d_cs.append(empirical_cs(movable, fixed, sigma))
        traj.mmd_sq.append(empirical_mmd_sq(movable, fixed, sigma))
        m_var = ad.Var(movable)
        self_term = ad.log(ad.vsum(ad.exp(ad.pairwise_sqdist(m_var, m_var) * scale)) * (1.0 / n_opt**2))
        cross_term = ad.log(
            ad.vsum(ad.exp(ad.pairwise_sqdist(m_var, ad.Var(fixed)) * scale))
            * (1.0 / (n_opt * n_fixed))
        )
        loss = self_term - 2.0 * cross_term
        if not np.isfinite(loss.value):
            traj.aborted = True
            break
        ad.backward(loss)
        movable = movable - lr * ad.grad_of(m_var)
    traj.d_cs.append(empirical_cs(movable, fixed, sigma))
    traj.mmd_sq.append(empirical_mmd_sq(movable, fixed, sigma))
    traj.movable = movable
    return traj


def _coverage(points: np.ndarray, center, radius: float = 3.0) -> float:
    dist = np.linalg.norm(points - np.asarray(center), axis=1)
    return float(np.mean(dist <= radius))


def _mixture_log_density_grad(x: np.ndarray, centers) -> tuple:
    """log p and grad_x log p for an equal-weight unit-covariance mixture."""
    centers = np.asarray(centers, dtype=np.float64)
    d = x.shape[1]
    log_comp = np.stack(
        [
            -0.5 * np.sum((x - c) ** 2, axis=1) - 0.5 * d * math.log(2 * math.pi)
            for c in centers
        ],
        axis=1,
    ) + math.log(0.5)
    peak = log_comp.max(axis=1, keepdims=True)
    weights = np.exp(log_comp - peak)
    log_p = (peak[:, 0] + np.log(weights.sum(axis=1)))
    resp = weights / weights.sum(axis=1, keepdims=True)
    grad = np.einsum("nk,nkd->nd", resp, centers[None, :, :] - x[:, None, :])
    return log_p, grad


def reverse_kl_fit(
    centers=((4.0, 4.0), (-4.0, -4.0)),
    steps: int = 600,
    lr: float = 0.05,
    n_mc: int = 64,
    seed: int = 0,
) -> tuple:
    """Fit a single diagonal Gaussian to the mixture by reverse KL.

    Minimizes -H(q) - E_q[log p] with reparameterized sampling; returns
    (mean, std).  Mode-seeking: with a symmetric start the sampling
    noise breaks the tie and the fit collapses onto one mode.
    """
    dim = len(centers[0])
    mu = np.zeros(dim)
    log_s = np.zeros(dim)
    for i in range(int(steps)):
        eps = rng.standard_normal((n_mc, dim), seed, 83, i)
        s = np.exp(log_s)
        x = mu + s * eps
        _, grad_logp = _mixture_log_density_grad(x, centers)
        grad_mu = -grad_logp.mean(axis=0)
        grad_log_s = -1.0 - (grad_logp * eps).mean(axis=0) * s
        mu = mu - lr * grad_mu
        log_s = log_s - lr * grad_log_s
    return mu, np.exp(log_s)


def demo_mode_coverage(seed: int = 0, steps: int = 150) -> dict:
    """Contrast CS cloud descent with the mode-seeking reverse-KL fit.

    Runs the CS descent on the (4,4)/(-4,-4) mixture, reports the
    fraction of movable samples within radius 3 of each mode; fits a
    single Gaussian by reverse KL and reports how its mass distributes
    over the modes and which one it collapsed onto.
    """
    centers = ((4.0, 4.0), (-4.0, -4.0))
    traj = demo_cloud_descent(centers=centers, steps=steps, seed=seed)
    cs_cov = [_coverage(traj.movable, c) for c in centers]
    mu, s = reverse_kl_fit(centers=centers, seed=seed)
    draws = mu + s * rng.standard_normal((2000, 2), seed, 84)
    kl_mass = [_coverage(draws, c) for c in centers]
    return {
        "cs_coverage": cs_cov,
        "kl_mass": kl_mass,
        "kl_collapsed_mode": int(np.argmax(kl_mass)),
        "kl_mean": mu.tolist(),
        "kl_std": s.tolist(),
        "cs_steps": steps,
        "movable_final": traj.movable,
    }


# ----------------------------------------------------------------------
# Consistency study
# ----------------------------------------------------------------------


def silverman_width(samples: np.ndarray) -> float:
    """Silverman's rule of thumb for 1-D data."""
    samples = np.asarray(samples)
    return 1.06 * float(np.std(samples)) * samples.size ** (-0.2)


# Frozen after calibration: N=1600 with sigma = N^(-1/5) gave a median
# error of 0.0155 over 20 seeds (seed 0); bound set with ~2x margin.
CONSISTENCY_FINAL_BOUND = 0.03


def consistency_study(n_grid=(100, 400, 1600), seeds: int = 20, seed: int = 0) -> list:
    """Median |estimate - closed form| for N(0,1) vs N(1,1) over sample sizes.

    Bandwidth follows sigma_N = N^(-1/5) (standard KDE rate); the closed
    form in the canonical convention is 0.5.  The median error must
    shrink as N grows for the estimator to be consistent.
    """
    closed = gaussian_cs(
        GaussianParams([0.0], [[1.0]]), GaussianParams([1.0], [[1.0]]), "eq10"
    )
    table = []
    for n in n_grid:
        width = float(n) ** (-0.2)
        errors = []
        for s in range(seeds):
            a = rng.standard_normal((n, 1), seed, 61, n, s)
            b = rng.standard_normal((n, 1), seed, 62, n, s) + 1.0
            errors.append(abs(empirical_cs(a, b, width) - closed))
        table.append({"n": int(n), "sigma": width, "median_error": float(np.median(errors))})
    return table
