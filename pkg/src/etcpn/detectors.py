"""Semi-supervised one-class detectors trained on fault-free residuals.

Three detector families share one sign convention (positive score means
anomalous):

* a one-class SVM solving the standard dual ``min 1/2 a'Ka`` over the
  simplex-with-box ``sum a = 1, 0 <= a_i <= 1/(nu N)``;
* a data-description hypersphere on the same dual (with an RBF kernel the
  two coincide, since ``k(x, x)`` is constant);
* an elliptic envelope thresholding the Mahalanobis distance of a shrunk
  empirical Gaussian fit at the ``1 - contamination`` training quantile.

The dual is solved by pairwise coordinate updates with most-violating-pair
selection and lowest-index tie-breaking, so training is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, TrainingError
from .textfmt import fmt_float, fmt_matrix, fmt_vector, parse_matrix_literal


@dataclass
class KernelSpec:
    """RBF kernel with an explicit width or the variance-scaled auto rule."""

    kind: str = "rbf"
    gamma: object = "scale"

    def resolve(self, X) -> float:
        if self.kind != "rbf":
            raise DimensionError(f"unsupported kernel {self.kind!r}")
        if self.gamma == "scale":
            var = float(np.asarray(X).var())
            if var <= 0:
                return 1.0
            return 1.0 / (X.shape[1] * var)
        g = float(self.gamma)
        if g <= 0:
            raise DimensionError("gamma must be positive")
        return g


@dataclass
class DetectorConfig:
    """Shipped hyperparameters for the three detectors."""

    nu: float = 0.12
    gamma_svdd: float = 0.1
    gamma_ocsvm: object = "scale"
    contamination: float = 0.05

    def __post_init__(self):
        if not 0 < self.nu <= 1:
            raise DimensionError("nu must lie in (0, 1]")
        if not 0 < self.contamination < 0.5:
            raise DimensionError("contamination must lie in (0, 0.5)")


def rbf_kernel(X, Y, gamma: float) -> np.ndarray:
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    sq = (
        np.sum(X**2, axis=1)[:, None]
        + np.sum(Y**2, axis=1)[None, :]
        - 2.0 * X @ Y.T
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _solve_box_simplex_qP(K, C, tol=1e-8, max_iter=200_000):
    """Minimise 1/2 a'Ka subject to sum a = 1, 0 <= a_i <= C.

    Pairwise updates on the most violating pair; ties resolve to the lowest
    index through argmin/argmax.  Raises on non-convergence with the final
    KKT violation attached.
    """
    N = K.shape[0]
    if C < 1.0 / N - 1e-12:
        raise TrainingError("box constraint incompatible with the simplex")
    alpha = np.full(N, 1.0 / N)
    g = K @ alpha
    ctol = 1e-12
    violation = np.inf
    for _ in range(max_iter):
        up_mask = alpha < C - ctol
        dn_mask = alpha > ctol
        g_up = np.where(up_mask, g, np.inf)
        g_dn = np.where(dn_mask, g, -np.inf)
        i = int(np.argmin(g_up))
        j = int(np.argmax(g_dn))
        violation = g[j] - g[i]
        if violation <= tol:
            return alpha, violation
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        step = violation / eta if eta > 1e-14 else np.inf
        step = min(step, C - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        g += step * (K[:, i] - K[:, j])
    raise TrainingError(f"dual solver did not converge; KKT violation {violation:.3e}")


def _offset_from_margin(g, alpha, C):
    """Decision offset from the margin support vectors.

    The minimum margin gradient keeps every margin vector on the normal
    side despite the solver tolerance, which preserves the training-outlier
    half of the nu property (outliers stay a subset of the bound vectors).
    """
    ctol = 1e-9 * C
    margin = (alpha > ctol) & (alpha < C - ctol)
    if np.any(margin):
        return float(g[margin].min())
    at_bound = alpha >= C - ctol
    at_zero = alpha <= ctol
    if np.any(at_bound) and np.any(at_zero):
        return float((g[at_bound].max() + g[at_zero].min()) / 2.0)
    if np.any(at_bound):
        return float(g[at_bound].max())
    return float(g.mean())


@dataclass
class OneClassModel:
    """Trained decision function; ``score > 0`` flags an anomaly."""

    kind: str
    d: int
    # kernel-machine fields
    support_vectors: np.ndarray | None = None
    alpha: np.ndarray | None = None
    rho: float | None = None
    gamma: float | None = None
    nu: float | None = None
    center_norm2: float | None = None
    radius2: float | None = None
    # envelope fields
    mean: np.ndarray | None = None
    covariance: np.ndarray | None = None
    tau2: float | None = None
    contamination: float | None = None

    def __post_init__(self):
        if self.covariance is not None:
            self._chol = np.linalg.cholesky(self.covariance)
        else:
            self._chol = None


def train_ocsvm(X, nu: float = 0.12, kernel: KernelSpec | None = None) -> OneClassModel:
    """Fit the one-class SVM dual on fault-free samples."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, d = X.shape
    if N < 2:
        raise TrainingError("need at least two training samples")
    if not np.all(np.isfinite(X)):
        raise TrainingError("training data must be finite")
    kernel = kernel or KernelSpec()
    gamma = kernel.resolve(X)
    K = rbf_kernel(X, X, gamma)
    C = 1.0 / (nu * N)
    alpha, _ = _solve_box_simplex_qP(K, C)
    g = K @ alpha
    rho = _offset_from_margin(g, alpha, C)
    keep = alpha > 1e-10 / N
    return OneClassModel(
        kind="ocsvm",
        d=d,
        support_vectors=X[keep],
        alpha=alpha[keep],
        rho=rho,
        gamma=gamma,
        nu=nu,
    )


def train_svdd(X, nu: float = 0.12, kernel: KernelSpec | None = None) -> OneClassModel:
    """Fit the minimal enclosing hypersphere in RBF feature space.

    With a constant-diagonal kernel the dual coincides with the one-class
    SVM dual; the decision compares squared feature-space distance to the
    radius fixed by the margin support vectors.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, d = X.shape
    if N < 1:
        raise TrainingError("empty training set")
    if not np.all(np.isfinite(X)):
        raise TrainingError("training data must be finite")
    kernel = kernel or KernelSpec(gamma=0.1)
    gamma = kernel.resolve(X)
    if N == 1:
        return OneClassModel(
            kind="svdd",
            d=d,
            support_vectors=X.copy(),
            alpha=np.array([1.0]),
            gamma=gamma,
            nu=nu,
            center_norm2=1.0,
            radius2=0.0,
            rho=1.0,
        )
    K = rbf_kernel(X, X, gamma)
    C = 1.0 / (nu * N)
    alpha, _ = _solve_box_simplex_qP(K, C)
    g = K @ alpha
    center_norm2 = float(alpha @ g)
    rho = _offset_from_margin(g, alpha, C)
    radius2 = 1.0 - 2.0 * rho + center_norm2
    keep = alpha > 1e-10 / N
    return OneClassModel(
        kind="svdd",
        d=d,
        support_vectors=X[keep],
        alpha=alpha[keep],
        rho=rho,
        gamma=gamma,
        nu=nu,
        center_norm2=center_norm2,
        radius2=radius2,
    )


def train_ee(X, contamination: float = 0.05) -> OneClassModel:
    """Fit a shrunk Gaussian envelope with a training-quantile threshold."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, d = X.shape
    if N <= d:
        raise TrainingError(f"need more samples ({N}) than dimensions ({d})")
    mean = X.mean(axis=0)
    centred = X - mean
    S = (centred.T @ centred) / N
    lam = 1e-6 * np.trace(S) / d
    cov = S + lam * np.eye(d)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise TrainingError("covariance singular even after shrinkage")
    model = OneClassModel(
        kind="ee", d=d, mean=mean, covariance=cov, contamination=contamination
    )
    d2 = _mahalanobis2(model, X)
    idx = min(N - 1, max(0, int(np.ceil((1.0 - contamination) * N)) - 1))
    model.tau2 = float(np.sort(d2)[idx])
    return model


def _mahalanobis2(model: OneClassModel, X) -> np.ndarray:
    diff = np.atleast_2d(X) - model.mean
    z = np.linalg.solve(model._chol, diff.T)
    return np.sum(z**2, axis=0)


def score(model: OneClassModel, x):
    """Anomaly score, positive outside the learned normal region.

    Accepts a single sample or a batch; the batch form returns one score
    per row.
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.d:
        raise DimensionError(f"expected dimension {model.d}, got {X.shape[1]}")
    if model.kind == "ee":
        s = _mahalanobis2(model, X) - model.tau2
    elif model.kind == "ocsvm":
        kx = rbf_kernel(model.support_vectors, X, model.gamma)
        s = model.rho - model.alpha @ kx
    elif model.kind == "svdd":
        kx = rbf_kernel(model.support_vectors, X, model.gamma)
        dist2 = 1.0 - 2.0 * (model.alpha @ kx) + model.center_norm2
        s = dist2 - model.radius2
    else:
        raise DimensionError(f"unknown detector kind {model.kind!r}")
    return float(s[0]) if single else s


def predict(model: OneClassModel, x):
    """True (anomaly) where the score is strictly positive."""
    s = score(model, x)
    if np.isscalar(s):
        return s > 0
    return s > 0


# -- plain-text snapshots ---------------------------------------------------


def save_model(model: OneClassModel) -> str:
    lines = [f"detector: {model.kind}", f"dim: {model.d}"]
    if model.kind == "ee":
        lines += [
            f"contamination: {fmt_float(model.contamination)}",
            f"tau2: {fmt_float(model.tau2)}",
            f"mean: {fmt_vector(model.mean)}",
            f"covariance: {fmt_matrix(model.covariance)}",
        ]
    else:
        lines += [
            f"nu: {fmt_float(model.nu)}",
            f"gamma: {fmt_float(model.gamma)}",
            f"rho: {fmt_float(model.rho)}",
        ]
        if model.kind == "svdd":
            lines += [
                f"center_norm2: {fmt_float(model.center_norm2)}",
                f"radius2: {fmt_float(model.radius2)}",
            ]
        lines += [
            f"alpha: {fmt_vector(model.alpha)}",
            f"support_vectors: {fmt_matrix(model.support_vectors)}",
        ]
    return "\n".join(lines) + "\n"


def load_model(text: str) -> OneClassModel:
    fields = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(":")
        fields[key.strip()] = value.strip()
    kind = fields["detector"]
    d = int(fields["dim"])
    if kind == "ee":
        model = OneClassModel(
            kind="ee",
            d=d,
            mean=parse_matrix_literal(fields["mean"]).ravel(),
            covariance=parse_matrix_literal(fields["covariance"]),
            contamination=float(fields["contamination"]),
        )
        model.tau2 = float(fields["tau2"])
        return model
    kwargs = dict(
        kind=kind,
        d=d,
        nu=float(fields["nu"]),
        gamma=float(fields["gamma"]),
        rho=float(fields["rho"]),
        alpha=parse_matrix_literal(fields["alpha"]).ravel(),
        support_vectors=parse_matrix_literal(fields["support_vectors"]),
    )
    if kind == "svdd":
        kwargs["center_norm2"] = float(fields["center_norm2"])
        kwargs["radius2"] = float(fields["radius2"])
    return OneClassModel(**kwargs)
