"""Gibbs samplers: simulated annealing (one chain) and the Suzuki-Trotter
quantum annealing sampler (``m`` replicas on a ring coupled through purity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._kernels import sample_logits
from .core import ReplicaChain
from .energy import check_dataset
from .schedule import schedule_at

__all__ = [
    "SamplerConfig",
    "TraceRecord",
    "RunResult",
    "gibbs_probabilities",
    "sa_conditional",
    "qast_logits",
    "qast_conditional",
    "sa_sweep",
    "qast_sweep",
    "replica_order",
    "run",
    "equal_budget_compare",
    "ComparisonRow",
    "Comparison",
    "sa_chain_seed",
    "TRACE_FIELDS",
]

TRACE_FIELDS = (
    "iteration",
    "beta",
    "gamma",
    "f",
    "beta_over_m",
    "min_energy",
    "mean_energy",
    "mean_purity",
    "best_energy_ever",
    "past_beta_m",
)


@dataclass(frozen=True)
class SamplerConfig:
    seed: int
    max_iters: int = 1000
    window: int = 50
    tol: float = 1e-9
    mode: str = "qast"
    m: int = 8
    block_order: bool = False
    debug: bool = False

    def __post_init__(self):
        bad = []
        if self.mode not in ("sa", "qast"):
            bad.append(f"mode must be 'sa' or 'qast', got {self.mode!r}")
        if self.max_iters < 1:
            bad.append("max_iters must be >= 1")
        if self.window < 1:
            bad.append("window must be >= 1")
        if not self.tol >= 0:
            bad.append("tol must be >= 0")
        if self.m < 1:
            bad.append("m must be >= 1")
        if self.block_order and self.m % 2:
            bad.append("block_order needs an even number of replicas")
        if bad:
            raise ValueError("; ".join(bad))


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    beta: float
    gamma: float
    f: float
    beta_over_m: float
    min_energy: float
    mean_energy: float
    mean_purity: float
    best_energy_ever: float
    past_beta_m: bool

    def as_row(self):
        return tuple(getattr(self, name) for name in TRACE_FIELDS)


@dataclass
class RunResult:
    labels: np.ndarray
    energy: float
    trace: list = field(repr=False)
    iterations: int
    termination: str
    replica_sweeps: int
    replica_energies: list = field(default_factory=list)


def gibbs_probabilities(logits):
    """Softmax with the maximum subtracted; ``-inf`` entries get probability 0."""
    logits = np.asarray(logits, dtype=np.float64)
    w = np.exp(logits - logits.max())
    return w / w.sum()


def sa_conditional(model, i, beta):
    """Conditional label distribution of point ``i`` at inverse temperature ``beta``."""
    return gibbs_probabilities(-beta * model.candidate_energies(i))


def qast_logits(energies, purities, beta_over_m, f):
    """``-(beta/m) E_c + f * P_c``; an infinite coupling keeps only the
    purity-maximising labels."""
    logits = -beta_over_m * energies
    if math.isinf(f):
        return np.where(purities == purities.max(), logits, -np.inf)
    return logits + f * purities


def qast_conditional(model, chain, j, i, beta, f):
    """Conditional label distribution of point ``i`` in replica ``j``."""
    return gibbs_probabilities(
        qast_logits(model.candidate_energies(i), chain.candidate_neighbor_purity(j, i), beta / chain.m, f)
    )


def sa_sweep(model, beta, rng, on_draw=None):
    """Resample every label once, in index order.

    ``on_draw(i, probs)``, if given, receives each conditional before the draw.
    """
    zeros = np.zeros(model.k)
    for i in range(model.n):
        energies = model.candidate_energies(i)
        if on_draw is not None:
            on_draw(i, gibbs_probabilities(-beta * energies))
        c = sample_logits(energies, zeros, beta, 0.0, rng.random())
        model.relabel_point(i, c)
    return model.labels


def replica_order(m, block_order=False):
    """``0..m-1``, or evens then odds (ring neighbours never share a block)."""
    if block_order:
        return list(range(0, m, 2)) + list(range(1, m, 2))
    return list(range(m))


def qast_sweep(models, chain, beta, f, rngs, order=None, on_draw=None):
    """One pass over every point of every replica.

    ``rngs`` is one generator per replica, or a single generator shared by
    all of them.  ``on_draw(j, i, probs)``, if given, receives each
    conditional before the draw.
    """
    m = chain.m
    if isinstance(rngs, np.random.Generator):
        rngs = [rngs] * m
    bm = beta / m
    for j in order if order is not None else range(m):
        model, rng = models[j], rngs[j]
        for i in range(chain.n):
            energies, purities = model.candidate_energies(i), chain.candidate_neighbor_purity(j, i)
            if on_draw is not None:
                on_draw(j, i, gibbs_probabilities(qast_logits(energies, purities, bm, f)))
            c = sample_logits(energies, purities, bm, f, rng.random())
            model.relabel_point(i, c)
            chain.relabel(j, i, c)
    return chain


def run(model_factory, X, k, schedule, cfg):
    """Anneal from uniformly random labels until convergence or ``max_iters``.

    ``model_factory(X, k)`` builds one energy model per replica.  For
    ``cfg.mode == "sa"`` a single chain follows ``schedule.beta0 *
    schedule.r_beta**i``; for ``"qast"`` there are ``schedule.m`` replicas.
    The result holds the lowest-energy replica at termination.
    """
    X = check_dataset(X)
    n = X.shape[0]
    qa = cfg.mode == "qast"
    if qa and cfg.m != schedule.m:
        raise ValueError(f"config m={cfg.m} disagrees with schedule m={schedule.m}")
    m = schedule.m if qa else 1
    seqs = np.random.SeedSequence(cfg.seed).spawn(m)
    rngs = [np.random.default_rng(s) for s in seqs]
    models = [model_factory(X, k).reset(rng.integers(k, size=n)) for rng in rngs]
    chain = ReplicaChain([mdl.labels for mdl in models], k) if qa else None
    order = replica_order(m, cfg.block_order)
    threshold = float(schedule.m) if qa else 1.0

    trace = []
    best = math.inf
    last_improved = 0
    termination = "max_iters"
    for it in range(cfg.max_iters):
        st = schedule_at(schedule, it)
        if qa:
            qast_sweep(models, chain, st.beta, st.f_value, rngs, order)
            gamma, f, bm = st.gamma, st.f_value, st.beta_over_m
            mean_purity = chain.mean_adjacent_purity()
        else:
            sa_sweep(models[0], st.beta, rngs[0])
            gamma, f, bm = math.nan, math.nan, st.beta
            mean_purity = 1.0
        if cfg.debug:
            for mdl in models:
                mdl.check_consistency()
            if qa:
                chain.check()
                assert all(np.array_equal(mdl.labels, r) for mdl, r in zip(models, chain.labels))
        energies = [mdl.energy() for mdl in models]
        emin = min(energies)
        if emin < best - cfg.tol:
            last_improved = it
        best = min(best, emin)
        trace.append(
            TraceRecord(
                it, st.beta, gamma, f, bm, emin, math.fsum(energies) / m, mean_purity, best, st.beta >= threshold
            )
        )
        if it - last_improved >= cfg.window:
            termination = "converged"
            break

    finals = [mdl.energy_full(mdl.labels) for mdl in models]
    j = int(np.argmin(finals))
    iterations = len(trace)
    return RunResult(
        labels=models[j].labels.copy(),
        energy=finals[j],
        trace=trace,
        iterations=iterations,
        termination=termination,
        replica_sweeps=iterations * m,
        replica_energies=finals,
    )


def sa_chain_seed(seed, c):
    """Seed of the ``c``-th SA chain paired with QA-ST run ``seed``."""
    return int(np.random.SeedSequence([seed, c + 1]).generate_state(1)[0])


@dataclass(frozen=True)
class ComparisonRow:
    seed: int
    qa_energy: float
    sa_energy: float
    sa_chains: int
    qa_sweeps: int
    sa_sweeps: int
    qa_iterations: int
    qa_wins: bool


@dataclass
class Comparison:
    rows: list
    qa_runs: dict = field(repr=False)
    sa_runs: dict = field(repr=False)

    @property
    def win_rate(self):
        return sum(r.qa_wins for r in self.rows) / len(self.rows)

    @property
    def qa_median(self):
        return float(np.median([r.qa_energy for r in self.rows]))

    @property
    def sa_median(self):
        return float(np.median([r.sa_energy for r in self.rows]))


def equal_budget_compare(model_factory, X, k, qa_schedule, sa_schedule, cfg, seeds):
    """QA-ST against independent SA chains with the same replica-sweep budget.

    For every seed one QA-ST run with ``m`` replicas is made, then ``m`` SA
    chains (each from its own derived seed) capped at the QA-ST iteration
    count, so the summed sweeps match exactly.  Budget left over by chains
    that converged early is spent on further SA restarts.  The SA figure of
    a seed is the lowest returned energy over its chains.
    """
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValueError("equal_budget_compare needs at least two seeds")
    m = qa_schedule.m
    rows, qa_runs, sa_runs = [], {}, {}
    for seed in seeds:
        qa = run(model_factory, X, k, qa_schedule, replace(cfg, seed=seed, mode="qast", m=m))
        budget = qa.replica_sweeps
        used = 0
        chains = []
        while used < budget:
            cap = qa.iterations if len(chains) < m else budget - used
            sa_cfg = replace(cfg, seed=sa_chain_seed(seed, len(chains)), mode="sa", max_iters=min(cap, budget - used))
            res = run(model_factory, X, k, sa_schedule, sa_cfg)
            used += res.replica_sweeps
            chains.append(res)
        sa_best = min(r.energy for r in chains)
        rows.append(
            ComparisonRow(seed, qa.energy, sa_best, len(chains), budget, used, qa.iterations, qa.energy <= sa_best)
        )
        qa_runs[seed] = qa
        sa_runs[seed] = chains
    return Comparison(rows, qa_runs, sa_runs)
