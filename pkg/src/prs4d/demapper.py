"""Soft demapping under mismatched Gaussian channel laws and GMI estimation.

Two channel-law assumptions are supported: a shared scalar per-dimension
variance (iid model) and a per-constellation-point 4x4 covariance
(correlated model). LLRs use the convention L = log(P[bit=0] / P[bit=1]);
the GMI penalty term is evaluated so that an LLR favoring the true bit
contributes a small penalty and GMI approaches m at high SNR.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .constellation import Constellation4D
from .rxdsp import SymbolBatch

LLR_CLAMP_NATS = 50.0
_LOG2 = np.log(2.0)


@dataclass(frozen=True)
class NoiseModel:
    """Demapper channel-law assumption.

    kind "iid": sigma2 is the shared per-dimension noise variance.
    kind "cg": covariances is an (M, N, N) stack of per-point covariance
    matrices (symmetric positive-definite after regularization).
    """

    kind: str
    sigma2: float | None = None
    covariances: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "iid":
            if self.sigma2 is None or self.sigma2 < 0:
                raise ValueError("iid model requires sigma2 >= 0")
        elif self.kind == "cg":
            if self.covariances is None:
                raise ValueError("cg model requires covariances")
        else:
            raise ValueError(f"unknown noise model kind {self.kind!r}")

    @classmethod
    def iid(cls, sigma2: float) -> "NoiseModel":
        return cls(kind="iid", sigma2=float(sigma2))

    @classmethod
    def cg(cls, covariances: np.ndarray) -> "NoiseModel":
        return cls(kind="cg", covariances=np.asarray(covariances, dtype=float))


@dataclass
class LlrBatch:
    """Per-bit LLRs aligned with the transmitted bits, both Ns x m."""

    llrs: np.ndarray
    bits: np.ndarray

    def __post_init__(self):
        self.llrs = np.asarray(self.llrs, dtype=float)
        self.bits = np.asarray(self.bits)
        if self.llrs.shape != self.bits.shape:
            raise ValueError("llrs/bits shape mismatch")


def estimate_iid_sigma2(batch: SymbolBatch) -> float:
    """Average per-dimension residual variance over the batch.

    Returns 0.0 for a noiseless batch; demapping with sigma2 = 0 is an
    error downstream.
    """
    if batch.ns < 100:
        raise ValueError(f"need at least 100 symbols, got {batch.ns}")
    resid = batch.rx_points - batch.tx_points
    n_dim = batch.tx_points.shape[1]
    return float(np.sum(resid**2) / (n_dim * batch.ns))


def estimate_point_covariances(
    batch: SymbolBatch,
    c: Constellation4D,
    epsilon: float | None = None,
    min_occurrences: int = 30,
) -> np.ndarray:
    """Per-point sample covariance of the residual rx - s_i.

    Second moment about the true constellation point, not the sample
    mean. epsilon * I is added for positive definiteness; the default is
    1e-6 times the overall per-dimension variance.
    """
    n_dim = c.points.shape[1]
    if epsilon is None:
        resid = batch.rx_points - batch.tx_points
        epsilon = 1e-6 * float(np.sum(resid**2) / (n_dim * batch.ns))
    covs = np.empty((c.M, n_dim, n_dim))
    for i in range(c.M):
        sel = batch.tx_indices == i
        n_i = int(sel.sum())
        if n_i < min_occurrences:
            raise ValueError(
                f"constellation point {i} transmitted {n_i} times; "
                f"need at least {min_occurrences}"
            )
        r = batch.rx_points[sel] - c.points[i]
        covs[i] = (r.T @ r) / n_i + epsilon * np.eye(n_dim)
    return covs


def gaussian_logpdf(y: np.ndarray, s: np.ndarray, cov: np.ndarray) -> float:
    """Log density of an N-dimensional Gaussian with mean s, covariance cov.

    Uses a Cholesky factorization; never forms an explicit inverse.
    """
    y = np.asarray(y, dtype=float)
    s = np.asarray(s, dtype=float)
    cov = np.asarray(cov, dtype=float)
    n = y.size
    chol = cholesky(cov, lower=True)  # raises LinAlgError if not PD
    z = solve_triangular(chol, y - s, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(-0.5 * (n * np.log(2 * np.pi) + logdet + z @ z))


def _logpdf_matrix(y: np.ndarray, c: Constellation4D, model: NoiseModel) -> np.ndarray:
    """(Ns, M) matrix of log f(y_j | s_i) under the model."""
    y = np.asarray(y, dtype=float)
    n_dim = c.points.shape[1]
    if model.kind == "iid":
        if model.sigma2 <= 0:
            raise ValueError("sigma2 must be positive for demapping")
        d2 = cdist(y, c.points, metric="sqeuclidean")
        return -d2 / (2 * model.sigma2) - 0.5 * n_dim * np.log(
            2 * np.pi * model.sigma2
        )
    covs = model.covariances
    if covs.shape[0] != c.M:
        raise ValueError("cg model needs one covariance per constellation point")
    out = np.empty((y.shape[0], c.M))
    for i in range(c.M):
        chol = cholesky(covs[i], lower=True)
        z = solve_triangular(chol, (y - c.points[i]).T, lower=True)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        out[:, i] = -0.5 * (
            n_dim * np.log(2 * np.pi) + logdet + np.sum(z**2, axis=0)
        )
    return out


def llrs_for_points(
    y: np.ndarray,
    c: Constellation4D,
    model: NoiseModel,
    clamp: float = LLR_CLAMP_NATS,
) -> np.ndarray:
    """(Ns, m) LLR matrix, L = log P0/P1, computed via log-sum-exp."""
    logf = _logpdf_matrix(y, c, model)
    llrs = np.empty((logf.shape[0], c.m))
    for k in range(c.m):
        zero = c.labels[:, k] == 0
        llrs[:, k] = logsumexp(logf[:, zero], axis=1) - logsumexp(
            logf[:, ~zero], axis=1
        )
    return np.clip(llrs, -clamp, clamp)


def compute_llrs(
    batch: SymbolBatch,
    c: Constellation4D,
    model: NoiseModel,
    clamp: float = LLR_CLAMP_NATS,
) -> LlrBatch:
    """Demap a batch of received 4D symbols into per-bit LLRs."""
    llrs = llrs_for_points(batch.rx_points, c, model, clamp=clamp)
    bits = batch.tx_bits.reshape(batch.ns, c.m)
    return LlrBatch(llrs=llrs, bits=bits)


def gmi_from_llrs(llrs: LlrBatch, m: int) -> float:
    """Monte-Carlo GMI in bit per 4D symbol.

    GMI = m - (1/Ns) sum_{k,j} log2(1 + exp(-(-1)^{b_kj} L_kj)), so a
    saturated LLR with the correct sign contributes no penalty.
    """
    L = llrs.llrs
    b = np.asarray(llrs.bits)
    if L.shape != b.shape:
        raise ValueError("llrs/bits shape mismatch")
    if L.shape[1] != m:
        raise ValueError(f"expected {m} bit columns, got {L.shape[1]}")
    ns = L.shape[0]
    if ns < 1:
        raise ValueError("need at least one symbol")
    sign = 1.0 - 2.0 * b  # +1 for bit 0, -1 for bit 1
    penalty = np.logaddexp(0.0, -sign * L) / _LOG2
    return float(m - penalty.sum() / ns)


def _sigma2_per_dim(snr_db: float, n_dim: int) -> float:
    """Per-dimension noise variance for Es/N0 over an N-dim symbol, Es = 1.

    N0 is the total noise energy per symbol, spread evenly across the
    dimensions.
    """
    snr_lin = 10 ** (snr_db / 10)
    return 1.0 / (n_dim * snr_lin)


def awgn_gmi_reference(
    c: Constellation4D,
    snr_db: float,
    method: str = "quadrature",
    n_nodes: int = 8,
    ns: int = 1 << 16,
    seed: int = 0,
    clamp: float = LLR_CLAMP_NATS,
) -> float:
    """GMI of the constellation over 4D AWGN with a matched iid demapper.

    SNR is Es/N0 per 4D symbol with Es = 1. "quadrature" integrates the
    conditional penalty with a tensor Gauss-Hermite grid; "monte_carlo"
    runs the estimator end-to-end with ns symbols.
    """
    n_dim = c.points.shape[1]
    sigma2 = _sigma2_per_dim(snr_db, n_dim)
    model = NoiseModel.iid(sigma2)
    signs = 1.0 - 2.0 * c.labels.astype(float)  # (M, m)

    if method == "monte_carlo":
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, c.M, ns)
        y = c.points[idx] + rng.normal(scale=np.sqrt(sigma2), size=(ns, n_dim))
        llrs = llrs_for_points(y, c, model, clamp=clamp)
        penalty = np.logaddexp(0.0, -signs[idx] * llrs) / _LOG2
        return float(c.m - penalty.sum() / ns)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")

    nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
    grids = np.meshgrid(*([nodes] * n_dim), indexing="ij")
    z = np.stack([g.ravel() for g in grids], axis=1)  # (n^N, N)
    wgrids = np.meshgrid(*([weights] * n_dim), indexing="ij")
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    w /= np.pi ** (n_dim / 2)

    scale = np.sqrt(2 * sigma2)
    # batch all M conditional grids into one LLR evaluation
    y = (c.points[:, None, :] + scale * z[None, :, :]).reshape(-1, n_dim)
    llrs = llrs_for_points(y, c, model, clamp=clamp).reshape(
        c.M, z.shape[0], c.m
    )
    penalty = np.logaddexp(0.0, -signs[:, None, :] * llrs) / _LOG2
    total = np.einsum("q,iq->", w, penalty.sum(axis=2))
    return float(c.m - total / c.M)
