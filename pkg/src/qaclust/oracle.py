"""Exact dense realisation of the quantum clustering model for tiny instances.

States are the ``k**n`` assignments, indexed with the first point as the
most significant digit so that the ordering matches Kronecker products of
per-point indicator vectors.  Everything here exists to check the samplers
and the replica expansion; nothing scales.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import mpmath
import numpy as np

from .core import purity, similarity_s, similarity_sprime
from .schedule import coupling_f

__all__ = [
    "MAX_STATES",
    "MAX_CONFIGS",
    "OracleSizeError",
    "state_index",
    "state_labels",
    "all_states",
    "DenseHamiltonian",
    "build_hc",
    "build_hq",
    "single_site_rho",
    "matrix_exp",
    "matrix_exp_taylor",
    "p_sa_exact",
    "p_qa_exact",
    "similarity_matrix",
    "p_qast_enumerate",
    "qast_kernel_stationary",
    "single_site_closed_form",
    "verify_lemma_a1",
    "verify_lemma_a2",
    "total_variation",
    "random_lemma_case",
    "lemma_report",
]

MAX_STATES = 4096
MAX_CONFIGS = 10**7


class OracleSizeError(ValueError):
    pass


def _guard_states(n, k):
    K = k**n
    if K > MAX_STATES:
        raise OracleSizeError(f"k**n = {K} exceeds {MAX_STATES} states")
    return K


def state_index(labels, k):
    idx = 0
    for v in labels:
        v = int(v)
        if not 0 <= v < k:
            raise ValueError(f"label {v} out of range for k={k}")
        idx = idx * k + v
    return idx


def state_labels(index, n, k):
    if not 0 <= index < k**n:
        raise ValueError(f"state index {index} out of range")
    out = np.zeros(n, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        index, out[i] = divmod(index, k)
    return out


def all_states(n, k):
    """``(k**n, n)`` array of label vectors in state-index order."""
    _guard_states(n, k)
    return np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int64).reshape(k**n, n)


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


@dataclass(frozen=True)
class DenseHamiltonian:
    matrix: np.ndarray
    n: int
    k: int
    role: str  # "classical", "quantum" or "total"

    def __add__(self, other):
        if (self.n, self.k) != (other.n, other.k):
            raise ValueError("Hamiltonians act on different state spaces")
        return DenseHamiltonian(self.matrix + other.matrix, self.n, self.k, "total")


def build_hc(energies, n, k):
    """Diagonal matrix of the state energies."""
    K = _guard_states(n, k)
    energies = np.asarray(energies, dtype=np.float64)
    if energies.shape != (K,):
        raise ValueError(f"expected {K} energies, got shape {energies.shape}")
    return DenseHamiltonian(np.diag(energies), n, k, "classical")


def single_site_rho(k, gamma):
    """``gamma * (I_k - ones_k)``."""
    return gamma * (np.eye(k) - np.ones((k, k)))


def build_hq(n, k, gamma):
    """Sum over points of the single-site ``rho`` embedded by Kronecker products."""
    K = _guard_states(n, k)
    rho = single_site_rho(k, gamma)
    H = np.zeros((K, K))
    for i in range(n):
        H += np.kron(np.kron(np.eye(k**i), rho), np.eye(k ** (n - i - 1)))
    return DenseHamiltonian(H, n, k, "quantum")


def _matrix(H):
    return H.matrix if isinstance(H, DenseHamiltonian) else np.asarray(H, dtype=np.float64)


def matrix_exp(H, scale=1.0):
    """``exp(scale * H)`` for symmetric ``H`` via eigendecomposition."""
    A = _matrix(H)
    if A.shape[0] > MAX_STATES:
        raise OracleSizeError(f"{A.shape[0]} states exceeds {MAX_STATES}")
    w, V = np.linalg.eigh(scale * A)
    out = (V * np.exp(w)) @ V.T
    return 0.5 * (out + out.T)


def matrix_exp_taylor(A, dps=40, tol=None):
    """Power series of the matrix exponential in ``dps``-digit arithmetic.

    Slow; used as an independent reference for :func:`matrix_exp`.
    """
    with mpmath.workdps(dps):
        M = mpmath.matrix(np.asarray(A, dtype=np.float64).tolist())
        size = M.rows
        eps = mpmath.mpf(10) ** (-dps + 5) if tol is None else mpmath.mpf(tol)
        term = mpmath.eye(size)
        total = mpmath.eye(size)
        for l in range(1, 10_000):
            term = term * M / l
            total += term
            if mpmath.mnorm(term, 1) < eps * mpmath.mnorm(total, 1):
                break
        return np.array(total.tolist(), dtype=np.float64)


def p_sa_exact(energies, beta):
    """Boltzmann distribution ``exp(-beta E) / Z``."""
    e = -beta * np.asarray(energies, dtype=np.float64)
    w = np.exp(e - e.max())
    return w / w.sum()


def p_qa_exact(hc, hq, beta):
    """Normalised diagonal of ``exp(-beta (Hc + Hq))``."""
    A = _matrix(hc) + _matrix(hq)
    d = np.diag(matrix_exp(A, -beta)).copy()
    return d / d.sum()


_SIMILARITIES = {"s": similarity_s, "sprime": similarity_sprime}


def similarity_matrix(n, k, kind="s"):
    """``S[a, b]`` = similarity between states ``a`` and ``b``.

    ``kind`` is ``"s"`` (fraction of equal labels), ``"sprime"``
    (all-or-nothing) or ``"purity"`` (row-maximum purity, first argument on
    the rows; not symmetric).
    """
    states = all_states(n, k)
    K = len(states)
    S = np.empty((K, K))
    for a in range(K):
        for b in range(K):
            if kind == "purity":
                S[a, b] = purity(states[a], states[b], k)
            elif kind in _SIMILARITIES:
                S[a, b] = _SIMILARITIES[kind](states[a], states[b])
            else:
                raise ValueError(f"unknown similarity {kind!r}")
    return S


def _qast_coupling(n, k, beta, gamma, m, f):
    if f is None:
        if gamma is None:
            raise ValueError("give either gamma or f")
        f = coupling_f(beta, gamma, n, k, m)
    return f


def p_qast_enumerate(energies, n, k, beta, m, gamma=None, similarity="s", f=None, method="auto"):
    """Marginal of the first replica under the ring distribution
    ``prod_j exp(-(beta/m) E(r_j) + f * S(r_j, r_{j+1}))``, ``r_{m+1} = r_1``.

    ``f`` defaults to ``coupling_f(beta, gamma, n, k, m)``.  ``method`` is
    ``"enumerate"`` (explicit sum over all ``(k**n)**m`` replica tuples),
    ``"transfer"`` (the same sum as a product of transfer matrices) or
    ``"auto"`` (enumerate when within ``MAX_CONFIGS``).
    """
    K = _guard_states(n, k)
    energies = np.asarray(energies, dtype=np.float64)
    if energies.shape != (K,):
        raise ValueError(f"expected {K} energies")
    if m < 1:
        raise ValueError("m must be >= 1")
    f = _qast_coupling(n, k, beta, gamma, m, f)
    S = similarity_matrix(n, k, similarity)
    if method == "auto":
        method = "enumerate" if K**m <= MAX_CONFIGS else "transfer"
    site = -(beta / m) * energies
    if np.isinf(f):
        raise ValueError("infinite coupling has no finite ring distribution")
    if method == "enumerate":
        if K**m > MAX_CONFIGS:
            raise OracleSizeError(f"{K}**{m} configurations exceeds {MAX_CONFIGS}")
        cfg = np.array(list(itertools.product(range(K), repeat=m)), dtype=np.int64).reshape(-1, m)
        logw = site[cfg].sum(axis=1)
        for j in range(m):
            logw = logw + f * S[cfg[:, j], cfg[:, (j + 1) % m]]
        w = np.exp(logw - logw.max())
        marg = np.bincount(cfg[:, 0], weights=w, minlength=K)
    elif method == "transfer":
        L = site[:, None] + f * S
        T = np.exp(L - L.max())
        P = np.eye(K)
        for _ in range(m):
            P = P @ T
            P /= P.max()
        marg = np.diag(P).copy()
    else:
        raise ValueError(f"unknown method {method!r}")
    return marg / marg.sum()


def qast_kernel_stationary(energies, n, k, beta, m, f, order=None):
    """Exact stationary law of one QA-ST sweep as a Markov chain on replica tuples.

    Builds every single-site update with the neighbour purity
    ``purity(r_j, r_{j-1}) + purity(r_j, r_{j+1})`` recomputed from scratch,
    multiplies them in sweep order and returns ``(joint, first_marginal)``;
    ``joint`` has shape ``(k**n,) * m``.
    """
    K = _guard_states(n, k)
    N = K**m
    if N > MAX_STATES:
        raise OracleSizeError(f"{N} replica tuples exceeds {MAX_STATES}")
    energies = np.asarray(energies, dtype=np.float64)
    states = all_states(n, k)
    P = similarity_matrix(n, k, "purity")
    order = list(range(m)) if order is None else list(order)
    tuples = np.array(list(itertools.product(range(K), repeat=m)), dtype=np.int64).reshape(N, m)
    radix = K ** np.arange(m - 1, -1, -1)
    kernel = np.eye(N)
    for j in order:
        for i in range(n):
            step = np.zeros((N, N))
            for t, tup in enumerate(tuples):
                cand = np.empty(k, dtype=np.int64)
                for c in range(k):
                    lab = states[tup[j]].copy()
                    lab[i] = c
                    cand[c] = state_index(lab, k)
                if m == 1:
                    nb = np.full(k, 2.0)
                else:
                    nb = P[cand, tup[(j - 1) % m]] + P[cand, tup[(j + 1) % m]]
                logits = -(beta / m) * energies[cand] + f * nb
                p = np.exp(logits - logits.max())
                p /= p.sum()
                base = t - tup[j] * radix[j]
                for c in range(k):
                    step[t, base + cand[c] * radix[j]] += p[c]
            kernel = kernel @ step
    w, v = np.linalg.eig(kernel.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1))])
    pi = np.abs(pi) / np.abs(pi).sum()
    joint = pi.reshape((K,) * m)
    return joint, joint.reshape(K, -1).sum(axis=1)


def single_site_closed_form(k, t):
    """Closed form of ``exp(-t * (I_k - ones_k))``:
    ``exp(-t) delta + (exp(t (k - 1)) - exp(-t)) / k``."""
    off = (np.exp(t * (k - 1)) - np.exp(-t)) / k
    return np.exp(-t) * np.eye(k) + off * np.ones((k, k))


def _dev(a, b):
    # deviation relative to the scale of the reference entries
    b = np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(np.asarray(a) - b)) / max(1.0, float(np.max(np.abs(b)))))


def verify_lemma_a1(energies, n, k, beta, m):
    """Max deviation of ``exp(-(beta/m) Hc)`` from ``diag(exp(-(beta/m) E))``."""
    hc = build_hc(energies, n, k)
    lhs = matrix_exp(hc, -beta / m)
    rhs = np.diag(np.exp(-(beta / m) * np.asarray(energies, dtype=np.float64)))
    return _dev(lhs, rhs)


def verify_lemma_a2(n, k, beta, gamma, m):
    """Max deviation over three checks of the quantum transfer factor:

    * ``exp(-(beta/m) Hq)`` against the ``n``-fold Kronecker power of the
      single-site exponential;
    * the single-site exponential against its closed form;
    * ``exp(f / n)`` against the single-site diagonal / off-diagonal ratio.
    """
    t = beta * gamma / m
    hq = build_hq(n, k, gamma)
    full = matrix_exp(hq, -beta / m)
    site = matrix_exp(single_site_rho(k, gamma), -beta / m)
    kron = np.ones((1, 1))
    for _ in range(n):
        kron = np.kron(kron, site)
    devs = [_dev(full, kron), _dev(site, single_site_closed_form(k, t))]
    if k > 1 and t > 0:
        closed = single_site_closed_form(k, t)
        ratio = closed[0, 0] / closed[0, 1]
        f = coupling_f(beta, gamma, n, k, m)
        devs.append(_dev(np.exp(f / n), ratio))
    return max(devs)


def random_lemma_case(rng, max_n=3, max_k=3, max_m=8):
    """One random ``(energies, n, k, beta, gamma, m)`` draw for the lemma checks."""
    n = int(rng.integers(1, max_n + 1))
    k = int(rng.integers(1, max_k + 1))
    m = int(rng.integers(1, max_m + 1))
    beta = float(rng.uniform(0.05, 3.0))
    gamma = float(rng.uniform(0.05, 3.0))
    energies = rng.uniform(0.0, 1.0, size=k**n)
    return energies, n, k, beta, gamma, m


def lemma_report(seed, draws=100, tol=1e-9):
    """Run both lemma checks and the eigendecomposition-vs-series check on
    ``draws`` random tiny instances.

    Returns a JSON-ready dict with the per-check maxima, the overall maximum
    and whether it is within ``tol``.
    """
    rng = np.random.default_rng(seed)
    a1 = a2 = series = 0.0
    for _ in range(draws):
        energies, n, k, beta, gamma, m = random_lemma_case(rng)
        a1 = max(a1, verify_lemma_a1(energies, n, k, beta, m))
        a2 = max(a2, verify_lemma_a2(n, k, beta, gamma, m))
        hq = build_hq(n, k, gamma)
        series = max(series, _dev(matrix_exp(hq, -beta / m), matrix_exp_taylor(-(beta / m) * hq.matrix)))
    worst = max(a1, a2, series)
    return {
        "seed": int(seed),
        "draws": int(draws),
        "tolerance": tol,
        "lemma_a1_max_deviation": a1,
        "lemma_a2_max_deviation": a2,
        "matrix_exp_series_max_deviation": series,
        "max_deviation": worst,
        "passed": bool(worst <= tol),
    }
