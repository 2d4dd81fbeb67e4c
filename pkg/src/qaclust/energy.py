"""Energy models over clustering assignments.

An energy model binds a data matrix and a cluster count and keeps
per-cluster sufficient statistics for one assignment, so that the energies
of the ``k`` single-point relabellings of point ``i`` cost O(k) model
evaluations rather than a pass over the data.

Two models are provided:

* :class:`MoGNIWModel` -- collapsed mixture of Gaussians with a conjugate
  normal-inverse-Wishart prior per cluster and a symmetric Dirichlet prior on
  the mixing weights.  The energy is ``-log p(X, labels)``.
* :class:`SquaredLossModel` -- within-cluster sum of squared distances to the
  cluster mean.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, multigammaln

from . import _kernels
from .core import as_labels

__all__ = [
    "check_dataset",
    "EnergyModel",
    "NIWPrior",
    "MoGNIWModel",
    "SquaredLossModel",
    "niw_log_marginal",
    "MODELS",
]

_LOG_PI = math.log(math.pi)


def check_dataset(X):
    """Return ``X`` as a finite float64 ``(n, d)`` array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError("data must be an (n, d) array with n >= 1 and d >= 1")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contains non-finite values")
    return X


class EnergyModel(abc.ABC):
    """Contract shared by the energy models.

    Subclasses keep ``labels`` and the matching sufficient statistics in
    sync; :meth:`reset` must be called before the incremental methods.
    """

    def __init__(self, X, k):
        self.X = check_dataset(X)
        self.n, self.d = self.X.shape
        if int(k) < 1:
            raise ValueError("k must be >= 1")
        self.k = int(k)
        self.labels = None

    @abc.abstractmethod
    def energy_full(self, labels):
        """Energy of ``labels`` computed from the raw data."""

    @abc.abstractmethod
    def reset(self, labels):
        """Bind ``labels`` and rebuild the statistics from scratch."""

    @abc.abstractmethod
    def energy(self):
        """Energy of the bound assignment, from the cached statistics."""

    @abc.abstractmethod
    def candidate_energies(self, i):
        """Length-``k`` array; entry ``c`` is the energy with point ``i`` set to ``c``."""

    @abc.abstractmethod
    def relabel_point(self, i, c):
        """Move point ``i`` to cluster ``c``, updating the statistics."""

    @abc.abstractmethod
    def check_consistency(self, atol=1e-8):
        """Raise AssertionError if the statistics drifted from the labels."""

    def _bind(self, labels):
        labels = as_labels(labels, self.k)
        if labels.size != self.n:
            raise ValueError(f"assignment has {labels.size} points, data has {self.n}")
        return labels.copy()


def _group(X, labels, k):
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    return counts, sums


# ---------------------------------------------------------------------------
# squared loss


class SquaredLossModel(EnergyModel):
    """``E(labels) = sum_i ||x_i - mean(cluster of i)||^2``; empty clusters add 0."""

    def __init__(self, X, k):
        super().__init__(X, k)
        # translation invariant; centring keeps q - |s|^2/N well conditioned
        self._Xc = self.X - self.X.mean(axis=0)
        self._sq = np.einsum("ij,ij->i", self._Xc, self._Xc)

    def energy_full(self, labels):
        labels = self._bind(labels)
        parts = []
        for c in range(self.k):
            pts = self.X[labels == c]
            if len(pts):
                parts.append(float(np.sum((pts - pts.mean(axis=0)) ** 2)))
        return math.fsum(parts)

    def reset(self, labels):
        self.labels = self._bind(labels)
        self._counts, self._sums = _group(self._Xc, self.labels, self.k)
        self._sqsum = np.bincount(self.labels, weights=self._sq, minlength=self.k)
        self._loss = np.array(
            [_kernels._sq_loss(self._counts[c], self._sums[c], self._sqsum[c]) for c in range(self.k)]
        )
        return self

    def energy(self):
        return math.fsum(self._loss)

    def candidate_energies(self, i):
        return _kernels.sq_candidates(
            self._counts, self._sums, self._sqsum, self._loss, self._Xc[i], self._sq[i], self.labels[i]
        )

    def relabel_point(self, i, c):
        o = self.labels[i]
        if o == c:
            return
        _kernels.sq_move(self._counts, self._sums, self._sqsum, self._loss, self._Xc[i], self._sq[i], o, c)
        self.labels[i] = c

    def check_consistency(self, atol=1e-8):
        counts, sums = _group(self._Xc, self.labels, self.k)
        sqsum = np.bincount(self.labels, weights=self._sq, minlength=self.k)
        assert np.array_equal(counts, self._counts), "cluster counts out of sync"
        assert np.allclose(sums, self._sums, rtol=0, atol=atol), "cluster sums out of sync"
        assert np.allclose(sqsum, self._sqsum, rtol=0, atol=atol), "cluster square sums out of sync"


# ---------------------------------------------------------------------------
# collapsed mixture of Gaussians


@dataclass(frozen=True)
class NIWPrior:
    """Normal-inverse-Wishart prior plus a symmetric Dirichlet on the weights.

    ``lambda0`` is the inverse-Wishart scale matrix; the prior on a cluster
    covariance has mean ``lambda0 / (nu0 - d - 1)``.
    """

    mu0: np.ndarray
    kappa0: float
    nu0: float
    lambda0: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=np.float64))
        lam = np.atleast_2d(np.asarray(self.lambda0, dtype=np.float64))
        d = mu0.size
        if lam.shape != (d, d):
            raise ValueError(f"lambda0 must be {d}x{d}, got {lam.shape}")
        if not np.allclose(lam, lam.T):
            raise ValueError("lambda0 must be symmetric")
        if np.linalg.eigvalsh(lam).min() <= 0:
            raise ValueError("lambda0 must be positive definite")
        if not self.kappa0 > 0:
            raise ValueError("kappa0 must be positive")
        if not self.nu0 > d - 1:
            raise ValueError(f"nu0 must exceed d - 1 = {d - 1}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "lambda0", lam)

    @property
    def d(self):
        return self.mu0.size

    @classmethod
    def default(cls, X, kappa0=0.1, nu0=None, alpha=1.0):
        """Weakly informative prior centred on the data.

        ``mu0`` is the data mean, ``nu0 = d + 2`` and ``lambda0`` the diagonal
        of the data covariance (unit variance where a column is constant).
        """
        X = check_dataset(X)
        d = X.shape[1]
        var = X.var(axis=0, ddof=1) if X.shape[0] > 1 else np.ones(d)
        var = np.where(var > 0, var, 1.0)
        return cls(
            mu0=X.mean(axis=0),
            kappa0=kappa0,
            nu0=d + 2.0 if nu0 is None else nu0,
            lambda0=np.diag(var),
            alpha=alpha,
        )


def niw_log_marginal(pts, prior):
    """``log p(pts)`` with the Gaussian mean and covariance integrated out.

    Direct evaluation from the points; ``pts`` may be empty (returns 0).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    N = pts.shape[0] if pts.size else 0
    if N == 0:
        return 0.0
    d = prior.d
    kN = prior.kappa0 + N
    nN = prior.nu0 + N
    xbar = pts.mean(axis=0)
    dev = pts - xbar
    diff = xbar - prior.mu0
    lamN = prior.lambda0 + dev.T @ dev + (prior.kappa0 * N / kN) * np.outer(diff, diff)
    _, ld0 = np.linalg.slogdet(prior.lambda0)
    _, ldN = np.linalg.slogdet(lamN)
    return (
        -0.5 * N * d * _LOG_PI
        + multigammaln(0.5 * nN, d)
        - multigammaln(0.5 * prior.nu0, d)
        + 0.5 * prior.nu0 * ld0
        - 0.5 * nN * ldN
        + 0.5 * d * (math.log(prior.kappa0) - math.log(kN))
    )


class MoGNIWModel(EnergyModel):
    """Collapsed Gaussian mixture, ``E(labels) = -log p(X, labels)``.

    ``p(X, labels) = DirMult(sizes | alpha) * prod_c p(X_c | NIW)``; both
    factors depend only on the partition, so the energy is invariant under
    relabelling of the clusters.
    """

    def __init__(self, X, k, prior=None):
        super().__init__(X, k)
        if prior is None:
            prior = NIWPrior.default(self.X)
        if prior.d != self.d:
            raise ValueError(f"prior dimension {prior.d} != data dimension {self.d}")
        self.prior = prior
        # statistics are kept on centred data with the prior location moved along
        self._shift = self.X.mean(axis=0)
        self._Xc = self.X - self._shift
        self._outer_x = np.einsum("ni,nj->nij", self._Xc, self._Xc)
        m0 = prior.mu0 - self._shift
        self._k0m0 = prior.kappa0 * m0
        self._base = prior.lambda0 + prior.kappa0 * np.outer(m0, m0)
        # per-size lookup tables, N = 0..n
        sizes = np.arange(self.n + 2, dtype=np.float64)
        d, k0, n0, a = self.d, prior.kappa0, prior.nu0, prior.alpha
        _, ld0 = np.linalg.slogdet(prior.lambda0)
        self._kN = k0 + sizes
        self._const_N = (
            -0.5 * sizes * d * _LOG_PI
            + multigammaln(0.5 * (n0 + sizes), d)
            - multigammaln(0.5 * n0, d)
            + 0.5 * n0 * ld0
            + 0.5 * d * (math.log(k0) - np.log(self._kN))
        )
        self._half_nN = 0.5 * (n0 + sizes)
        self._lg_size = gammaln(sizes + a) - gammaln(a)
        self._dm_const = float(gammaln(self.k * a) - gammaln(self.n + self.k * a))
        self._tables = (self._base, self._k0m0, self._kN, self._const_N, self._half_nN)

    def _log_dirmult(self, counts):
        return self._dm_const + math.fsum(self._lg_size[counts])

    def energy_full(self, labels):
        labels = self._bind(labels)
        counts = np.bincount(labels, minlength=self.k)
        parts = [niw_log_marginal(self.X[labels == c], self.prior) for c in range(self.k) if counts[c]]
        parts.append(self._log_dirmult(counts))
        return -math.fsum(parts)

    def _cluster_log_ml(self, c):
        return _kernels.niw_logml(
            self._counts[c], self._sums[c], self._outers[c], *self._tables, np.empty((self.d, self.d))
        )

    def reset(self, labels):
        self.labels = self._bind(labels)
        self._counts, self._sums = _group(self._Xc, self.labels, self.k)
        self._outers = np.zeros((self.k, self.d, self.d))
        np.add.at(self._outers, self.labels, self._outer_x)
        self._logml = np.array([self._cluster_log_ml(c) for c in range(self.k)])
        return self

    def energy(self):
        return -(self._log_dirmult(self._counts) + math.fsum(self._logml))

    def candidate_energies(self, i):
        return _kernels.mog_candidates(
            self._counts,
            self._sums,
            self._outers,
            self._logml,
            self._Xc[i],
            self._outer_x[i],
            self.labels[i],
            *self._tables,
            self._lg_size,
            self._dm_const,
            self.prior.alpha,
        )

    def relabel_point(self, i, c):
        o = self.labels[i]
        if o == c:
            return
        _kernels.mog_move(
            self._counts, self._sums, self._outers, self._logml, self._Xc[i], self._outer_x[i], o, c, *self._tables
        )
        self.labels[i] = c

    def check_consistency(self, atol=1e-8):
        counts, sums = _group(self._Xc, self.labels, self.k)
        outers = np.zeros_like(self._outers)
        np.add.at(outers, self.labels, self._outer_x)
        assert np.array_equal(counts, self._counts), "cluster counts out of sync"
        assert np.allclose(sums, self._sums, rtol=0, atol=atol), "cluster sums out of sync"
        assert np.allclose(outers, self._outers, rtol=0, atol=atol), "cluster scatter out of sync"


MODELS = {"mog_niw": MoGNIWModel, "sq_loss": SquaredLossModel}
