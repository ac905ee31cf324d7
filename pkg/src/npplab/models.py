"""Classical BCI pipelines: CSP / xDAWN spatial filters + logistic regression.

Two pipeline flavors are supported:

* ``csp_logvar`` — CSP filters, log-variance features (motor-imagery style)
* ``xdawn_flat`` — xDAWN filters, decimated flattened projections (ERP style)

Both feed a binary logistic-regression head trained by full-batch gradient
descent with validation-based early stopping.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import eigh

from .errors import ConfigError, DegenerateChannelError, FormatError, NumericalError

__all__ = [
    "SpatialFilters",
    "LogRegModel",
    "TrainOptions",
    "Pipeline",
    "fit_csp",
    "csp_logvar_features",
    "fit_xdawn",
    "xdawn_features",
    "fit_logreg",
    "predict",
    "fit_pipeline",
    "save_pipeline",
    "load_pipeline",
]

RIDGE = 1e-6  # relative ridge added to covariances: RIDGE * trace / C


@dataclass(frozen=True)
class SpatialFilters:
    """Spatial filter bank W (channels x filters) with its eigenvalues."""

    W: np.ndarray
    kind: str  # "CSP" or "XDAWN"
    eigenvalues: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        if not np.all(np.isfinite(W)):
            raise NumericalError("spatial filters contain non-finite entries")
        if W.shape[1] > W.shape[0]:
            raise ConfigError("more filters than channels")
        if self.kind not in ("CSP", "XDAWN"):
            raise ConfigError(f"unknown filter kind {self.kind!r}")
        object.__setattr__(self, "W", W)
        object.__setattr__(
            self, "eigenvalues", np.asarray(self.eigenvalues, dtype=np.float64)
        )

    @property
    def n_filters(self):
        return self.W.shape[1]


@dataclass(frozen=True)
class LogRegModel:
    """Binary logistic regression with learned feature standardization."""

    weights: np.ndarray
    bias: float
    feature_mean: np.ndarray
    feature_scale: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mean = np.asarray(self.feature_mean, dtype=np.float64)
        scale = np.asarray(self.feature_scale, dtype=np.float64)
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise NumericalError("model parameters are not finite")
        if np.any(scale <= 0):
            raise ConfigError("feature_scale entries must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "feature_mean", mean)
        object.__setattr__(self, "feature_scale", scale)

    def probability(self, features):
        z = (np.asarray(features) - self.feature_mean) / self.feature_scale
        return _sigmoid(z @ self.weights + self.bias)


@dataclass(frozen=True)
class TrainOptions:
    """Optimizer settings for the logistic-regression head."""

    l2_lambda: float = 1e-3
    max_epochs: int = 800
    learning_rate: float = 0.5
    patience: int = 60
    seed: int = 0

    def __post_init__(self):
        if min(self.l2_lambda, self.max_epochs, self.learning_rate, self.patience) <= 0:
            raise ConfigError("train options must all be positive")
        if self.patience > self.max_epochs:
            raise ConfigError("patience cannot exceed max_epochs")


@dataclass(frozen=True)
class Pipeline:
    """Trained classifier: spatial filters + feature extractor + LR head."""

    filters: SpatialFilters
    feature_kind: str  # "csp_logvar" or "xdawn_flat"
    lr: LogRegModel
    decim: int = 8
    n_classes: int = 2

    def __post_init__(self):
        expected = {"csp_logvar": "CSP", "xdawn_flat": "XDAWN"}
        if self.feature_kind not in expected:
            raise ConfigError(f"unknown feature kind {self.feature_kind!r}")
        if self.filters.kind != expected[self.feature_kind]:
            raise ConfigError(
                f"feature kind {self.feature_kind!r} inconsistent with "
                f"{self.filters.kind} filters"
            )


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _mean_class_covariance(x, ridge=RIDGE):
    """Mean of per-trial trace-normalized covariances for (N, C, S) data."""
    cov = np.einsum("ncs,nds->ncd", x, x) / x.shape[-1]
    tr = np.trace(cov, axis1=1, axis2=2)
    if np.any(tr <= 0):
        raise DegenerateChannelError("trial with zero total variance")
    cov = (cov.T / tr).T.mean(axis=0)
    c = cov.shape[0]
    return cov + (ridge * np.trace(cov) / c) * np.eye(c)


def fit_csp(trials, labels, n_pairs=3):
    """Fit common-spatial-pattern filters for a two-class problem.

    Solves the generalized eigenproblem of the class-mean covariances and
    keeps the ``n_pairs`` largest- and smallest-eigenvalue eigenvectors.
    The returned filters whiten the composite covariance:
    ``W.T @ (S1 + S2) @ W = I``.
    """
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size != 2:
        raise ConfigError(f"CSP needs exactly 2 classes, got {classes.size}")
    x = np.stack([np.asarray(t.data, dtype=np.float64) for t in trials])
    if 2 * n_pairs > x.shape[1]:
        raise ConfigError(f"{n_pairs} pairs exceed {x.shape[1]} channels")
    for c in classes:
        if np.sum(labels == c) < 2:
            raise ConfigError(f"class {c} has fewer than 2 trials")
    s1 = _mean_class_covariance(x[labels == classes[0]])
    s2 = _mean_class_covariance(x[labels == classes[1]])
    try:
        vals, vecs = eigh(s1, s1 + s2)
    except np.linalg.LinAlgError as err:
        raise NumericalError(f"composite covariance is singular: {err}") from err
    # ascending eigenvalues: smallest n_pairs + largest n_pairs
    order = np.concatenate([np.arange(x.shape[1] - n_pairs, x.shape[1])[::-1],
                            np.arange(n_pairs)])
    return SpatialFilters(W=vecs[:, order], kind="CSP", eigenvalues=vals[order])


def csp_logvar_features(trial, filters):
    """Log variance of each spatially filtered signal."""
    if filters.kind != "CSP":
        raise ConfigError("csp_logvar_features requires CSP filters")
    proj = filters.W.T @ trial.data
    var = proj.var(axis=-1)
    if np.any(var <= 0):
        raise DegenerateChannelError("zero-variance projection in CSP features")
    return np.log(var)


def fit_xdawn(trials, labels, n_filters=4):
    """Fit xDAWN-style filters maximizing evoked-to-total variance ratio.

    The target-class (label 1) average response estimates the evoked
    signal; filters are the top generalized eigenvectors of the evoked
    covariance against the total covariance.
    """
    labels = np.asarray(labels)
    if np.unique(labels).size != 2:
        raise ConfigError("xDAWN needs exactly 2 classes")
    x = np.stack([np.asarray(t.data, dtype=np.float64) for t in trials])
    if n_filters > x.shape[1]:
        raise ConfigError(f"{n_filters} filters exceed {x.shape[1]} channels")
    target = x[labels == 1]
    if target.shape[0] == 0:
        raise ConfigError("no target-class (label 1) trials")
    evoked = target.mean(axis=0)
    s_evoked = evoked @ evoked.T / evoked.shape[-1]
    s_total = np.einsum("ncs,nds->cd", x, x) / (x.shape[0] * x.shape[-1])
    c = x.shape[1]
    s_total = s_total + (RIDGE * np.trace(s_total) / c) * np.eye(c)
    try:
        vals, vecs = eigh(s_evoked, s_total)
    except np.linalg.LinAlgError as err:
        raise NumericalError(f"total covariance is singular: {err}") from err
    order = np.argsort(vals)[::-1][:n_filters]
    return SpatialFilters(W=vecs[:, order], kind="XDAWN", eigenvalues=vals[order])


def xdawn_features(trial, filters, decim=8):
    """Flattened, time-decimated spatial projection of one trial."""
    if filters.kind != "XDAWN":
        raise ConfigError("xdawn_features requires XDAWN filters")
    if decim < 1:
        raise ConfigError(f"decimation factor must be >= 1, got {decim}")
    proj = filters.W.T @ trial.data
    return proj[:, ::decim].ravel()


def logreg_loss_grad(w, b, x, y, l2_lambda):
    """Regularized mean log-loss and its gradient (bias unpenalized)."""
    z = x @ w + b
    # log(1 + exp(z)) - y*z, computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    loss += 0.5 * l2_lambda * float(w @ w)
    resid = _sigmoid(z) - y
    grad_w = x.T @ resid / x.shape[0] + l2_lambda * w
    grad_b = float(resid.mean())
    return loss, grad_w, grad_b


def _val_loss(w, b, x, y):
    z = x @ w + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def fit_logreg(features, labels, val_features, val_labels, opts):
    """Gradient-descent logistic regression with early stopping.

    Minimizes L2-regularized mean log-loss; training stops once the
    validation log-loss has not improved for ``opts.patience`` epochs, and
    the best-validation parameters are kept.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    xv = np.asarray(val_features, dtype=np.float64)
    yv = np.asarray(val_labels, dtype=np.float64)
    if not set(np.unique(np.concatenate([y, yv]))) <= {0.0, 1.0}:
        raise ConfigError("logistic regression requires binary 0/1 labels")
    if x.ndim != 2 or xv.shape[1] != x.shape[1]:
        raise ConfigError("feature dimensions of train and validation differ")

    w = np.zeros(x.shape[1])
    b = 0.0
    best = (w.copy(), b)
    best_val = _val_loss(w, b, xv, yv)
    stall = 0
    for _ in range(opts.max_epochs):
        loss, grad_w, grad_b = logreg_loss_grad(w, b, x, y, opts.l2_lambda)
        if not np.isfinite(loss):
            raise NumericalError("logistic loss diverged to non-finite value")
        w = w - opts.learning_rate * grad_w
        b = b - opts.learning_rate * grad_b
        val = _val_loss(w, b, xv, yv)
        if val < best_val - 1e-12:
            best_val = val
            best = (w.copy(), b)
            stall = 0
        else:
            stall += 1
            if stall >= opts.patience:
                break
    w, b = best
    dim = x.shape[1]
    return LogRegModel(weights=w, bias=b,
                       feature_mean=np.zeros(dim), feature_scale=np.ones(dim))


def _features(trial, filters, feature_kind, decim):
    if feature_kind == "csp_logvar":
        return csp_logvar_features(trial, filters)
    return xdawn_features(trial, filters, decim)


def predict(pipeline, trial):
    """Classify one (preprocessed) trial: returns (class, probability of 1).

    Ties at probability exactly 0.5 go to class 1.
    """
    f = _features(trial, pipeline.filters, pipeline.feature_kind, pipeline.decim)
    if f.shape[0] != pipeline.lr.weights.shape[0]:
        raise ConfigError(
            f"feature length {f.shape[0]} does not match model "
            f"dimension {pipeline.lr.weights.shape[0]}"
        )
    p = float(pipeline.lr.probability(f))
    return (1 if p >= 0.5 else 0), p


def fit_pipeline(train, val, kind, opts, n_pairs=3, n_filters=4, decim=8):
    """Train a full pipeline: filters and feature scaling on train only."""
    if not val.trials:
        raise ConfigError("validation set is empty")
    labels = train.labels()
    if kind == "csp_logvar":
        filters = fit_csp(train.trials, labels, n_pairs=n_pairs)
    elif kind == "xdawn_flat":
        filters = fit_xdawn(train.trials, labels, n_filters=n_filters)
    else:
        raise ConfigError(f"unknown pipeline kind {kind!r}")
    ftr = np.stack([_features(t, filters, kind, decim) for t in train.trials])
    fva = np.stack([_features(t, filters, kind, decim) for t in val.trials])
    mean = ftr.mean(axis=0)
    scale = ftr.std(axis=0)
    degenerate = scale <= 1e-12
    if np.any(degenerate):
        warnings.warn("degenerate training features: constant feature column(s)")
        scale = np.where(degenerate, 1.0, scale)
    lr = fit_logreg((ftr - mean) / scale, labels,
                    (fva - mean) / scale, val.labels(), opts)
    lr = replace(lr, feature_mean=mean, feature_scale=scale)
    return Pipeline(filters=filters, feature_kind=kind, lr=lr, decim=decim)


# --------------------------------------------------------------------------
# model container: little-endian flat binary, magic "EEGM", version 1

_MODEL_MAGIC = b"EEGM"
_KIND_CODES = {"csp_logvar": 0, "xdawn_flat": 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


def _write_array(fh, a):
    a = np.ascontiguousarray(a, dtype="<f8")
    fh.write(struct.pack("<I", a.size))
    fh.write(a.tobytes())


def _read_array(fh, n_expected=None):
    off = fh.tell()
    raw = fh.read(4)
    if len(raw) != 4:
        raise FormatError("truncated array header", offset=off)
    (n,) = struct.unpack("<I", raw)
    if n_expected is not None and n != n_expected:
        raise FormatError(f"array length {n} != expected {n_expected}", offset=off)
    buf = fh.read(8 * n)
    if len(buf) != 8 * n:
        raise FormatError("truncated array payload", offset=off + 4)
    return np.frombuffer(buf, dtype="<f8").copy()


def save_pipeline(pipeline, path):
    """Write a trained pipeline to a versioned flat binary file."""
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<I", 1))
        fh.write(struct.pack("<I", _KIND_CODES[pipeline.feature_kind]))
        fh.write(struct.pack("<I", pipeline.decim))
        c, f = pipeline.filters.W.shape
        fh.write(struct.pack("<II", c, f))
        _write_array(fh, pipeline.filters.W)
        _write_array(fh, pipeline.filters.eigenvalues)
        _write_array(fh, pipeline.lr.weights)
        _write_array(fh, np.array([pipeline.lr.bias]))
        _write_array(fh, pipeline.lr.feature_mean)
        _write_array(fh, pipeline.lr.feature_scale)


def load_pipeline(path):
    """Read a pipeline written by :func:`save_pipeline`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MODEL_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {_MODEL_MAGIC!r}", offset=0)
        (version,) = struct.unpack("<I", fh.read(4))
        if version != 1:
            raise FormatError(f"unsupported model version {version}", offset=4)
        (kind_code,) = struct.unpack("<I", fh.read(4))
        if kind_code not in _KIND_NAMES:
            raise FormatError(f"unknown pipeline kind code {kind_code}", offset=8)
        (decim,) = struct.unpack("<I", fh.read(4))
        c, f = struct.unpack("<II", fh.read(8))
        w = _read_array(fh, c * f).reshape(c, f)
        eigenvalues = _read_array(fh, f)
        weights = _read_array(fh)
        bias = float(_read_array(fh, 1)[0])
        feature_mean = _read_array(fh, weights.size)
        feature_scale = _read_array(fh, weights.size)
        trailing = fh.read(1)
        if trailing:
            raise FormatError("trailing bytes after model payload", offset=fh.tell() - 1)
    kind = _KIND_NAMES[kind_code]
    filters = SpatialFilters(W=w, kind="CSP" if kind == "csp_logvar" else "XDAWN",
                             eigenvalues=eigenvalues)
    lr = LogRegModel(weights=weights, bias=bias,
                     feature_mean=feature_mean, feature_scale=feature_scale)
    return Pipeline(filters=filters, feature_kind=kind, lr=lr, decim=decim)
