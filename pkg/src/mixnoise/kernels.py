"""Transition kernels: drift-corrected preconditioned MALA, Gibbs multiple-try
Metropolis, and the hybrid sampler that mixes them.

The Langevin kernel preconditions with a running estimate of the squared
gradient (RMSProp style). A position-dependent preconditioner changes the
stationary law of the discretized diffusion, so the proposal mean carries an
exact drift correction; together with the Metropolis step this makes the
kernel exact. The multiple-try kernel updates one component at a time from
independent candidate sets and jumps between posterior modes; components of
one color class of the dependence graph update in parallel.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, NumericalError
from .graphs import NeighborGraph
from .priors import sample_smooth_uniform_box, smooth_uniform_box_logpdf
from .records import ChainRecord
from .targets.base import PosteriorModel

V_FLOOR = 1e-30
_PIXEL_SALT = 0x6D74_6D00  # distinguishes per-pixel streams from the master stream


@dataclass
class PmalaConfig:
    """Step size, gradient-variance decay, and damping of the Langevin kernel."""

    epsilon: float
    alpha: float = 0.99
    eta: float = 1e-5
    tune_step_size: bool = False
    target_acceptance: float = 0.574
    use_drift: bool = True
    use_metropolis: bool = True

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ConfigurationError("alpha must lie in (0, 1)")
        if self.epsilon <= 0 or self.eta <= 0:
            raise ConfigurationError("epsilon and eta must be positive")


@dataclass
class MtmConfig:
    """Candidate count and proposal family of the multiple-try kernel."""

    n_candidates: int
    proposal: str = "smooth-uniform-box"
    proposal_delta: float = 1e4

    def __post_init__(self):
        if self.n_candidates < 1:
            raise ConfigurationError("need at least one candidate")
        if self.proposal not in ("smooth-uniform-box", "neighbor-subset-mixture"):
            raise ConfigurationError(f"unknown proposal kind: {self.proposal}")


@dataclass
class HybridConfig:
    """Mixture of the two kernels plus run-length bookkeeping."""

    p_mtm: float
    pmala: PmalaConfig
    mtm: MtmConfig
    iterations: int
    burn_in: int = 0
    checkpoint_every: int = 1000
    parallel: bool = True
    record_layout: str = "flat"

    def __post_init__(self):
        if not (0.0 <= self.p_mtm <= 1.0):
            raise ConfigurationError("p_mtm must lie in [0, 1]")
        if self.burn_in >= self.iterations:
            raise ConfigurationError("burn_in must be smaller than the iteration count")


class RngStreams:
    """Root seed fan-out: one master stream plus counter-keyed per-pixel streams.

    The pixel stream for (iteration, pixel) depends only on (seed, iteration,
    pixel), so chromatic-parallel and sequential sweeps consume identical
    randomness.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.master = np.random.Generator(np.random.Philox(key=np.random.SeedSequence(self.seed).generate_state(2, np.uint64)))

    def pixel(self, iteration: int, pixel: int) -> np.random.Generator:
        key = np.array([np.uint64(self.seed & 0xFFFFFFFFFFFFFFFF) ^ np.uint64(_PIXEL_SALT),
                        np.uint64((iteration << 32) | pixel)], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def master_state(self) -> dict:
        state = self.master.bit_generator.state
        return {
            "bit_generator": state["bit_generator"],
            "state": {k: np.asarray(v).tolist() for k, v in state["state"].items()},
            "buffer": np.asarray(state["buffer"]).tolist(),
            "buffer_pos": int(state["buffer_pos"]),
            "has_uint32": int(state["has_uint32"]),
            "uinteger": int(state["uinteger"]),
        }

    def restore_master(self, state: dict) -> None:
        restored = dict(state)
        restored["state"] = {k: np.asarray(v, dtype=np.uint64) for k, v in state["state"].items()}
        restored["buffer"] = np.asarray(state["buffer"], dtype=np.uint64)
        self.master.bit_generator.state = restored


@dataclass
class SamplerState:
    """Current position, gradient-variance vector, steps-since-accept counters,
    and cached potential derivatives at the current position."""

    theta: np.ndarray  # (N, D)
    v: np.ndarray  # (N, D)
    j: np.ndarray  # (N,)
    potential: float
    grad: np.ndarray
    hess_diag: np.ndarray

    @classmethod
    def initialize(cls, model: PosteriorModel, theta0: np.ndarray) -> "SamplerState":
        theta0 = np.array(theta0, dtype=float)
        if theta0.shape != (model.n_components, model.dim):
            raise ConfigurationError("starting point shape must be (N, D)")
        g, grad, hess = model.potential_with_derivatives(theta0)
        if not np.isfinite(g):
            raise ConfigurationError("starting point has non-finite potential")
        v = np.maximum(grad * grad, V_FLOOR)
        return cls(theta=theta0, v=v, j=np.zeros(model.n_components, dtype=np.int64),
                   potential=g, grad=grad, hess_diag=hess)


# -- elementary PMALA pieces ---------------------------------------------------


def rmsprop_update(v_prev: np.ndarray, grad_candidate: np.ndarray, alpha: float) -> np.ndarray:
    """Exponential moving average of squared gradients (candidates drive it)."""
    return alpha * np.asarray(v_prev, dtype=float) + (1.0 - alpha) * np.asarray(grad_candidate, dtype=float) ** 2


def preconditioner(v: np.ndarray, eta: float) -> np.ndarray:
    """Diagonal preconditioner 1 / (eta + sqrt(v)), elementwise."""
    return 1.0 / (eta + np.sqrt(np.asarray(v, dtype=float)))


def drift_iterate(grad, hess_diag, v, j, alpha: float, eta: float) -> np.ndarray:
    """Drift correction at the iterate: the pixel's own gradient entered v
    j steps ago, so its contribution carries a decay alpha^j.
    """
    grad = np.asarray(grad, dtype=float)
    v = np.maximum(np.asarray(v, dtype=float), V_FLOOR)
    j = np.asarray(j)
    decay = alpha ** j.astype(float)
    if grad.ndim == 2 and decay.ndim == 1:
        decay = decay[:, None]
    sq = np.sqrt(v)
    return -(1.0 - alpha) * decay * (grad * np.asarray(hess_diag, dtype=float)) / (2.0 * sq * (eta + sq) ** 2)


def drift_candidate(grad, hess_diag, v_new, alpha: float, eta: float) -> np.ndarray:
    """Drift correction at a candidate: fresh v, zero steps since accept."""
    grad = np.asarray(grad, dtype=float)
    v = np.maximum(np.asarray(v_new, dtype=float), V_FLOOR)
    sq = np.sqrt(v)
    return -(1.0 - alpha) * (grad * np.asarray(hess_diag, dtype=float)) / (2.0 * sq * (eta + sq) ** 2)


def _diag_gaussian_logpdf(x: np.ndarray, mean: np.ndarray, var: np.ndarray) -> float:
    r = x - mean
    return float(-0.5 * np.sum(r * r / var + np.log(2.0 * np.pi * var)))


@dataclass
class PmalaStepInfo:
    """Everything entering one accept/reject decision, for audits and tests."""

    accepted: bool
    accept_prob: float
    candidate: np.ndarray
    mu: np.ndarray
    var: np.ndarray
    mu_c: np.ndarray | None
    var_c: np.ndarray | None
    log_q_forward: float
    log_q_reverse: float
    v_new: np.ndarray


def pmala_step(state: SamplerState, model: PosteriorModel, cfg: PmalaConfig,
               rng: np.random.Generator, epsilon: float | None = None) -> PmalaStepInfo:
    """One whole-array proposal of the drift-corrected preconditioned MALA.

    Mutates ``state`` in place. The variance vector tracks candidate
    gradients whether or not the move is accepted; counters j reset on
    accept and increment on reject.
    """
    eps = cfg.epsilon if epsilon is None else epsilon
    g_prev = preconditioner(state.v, cfg.eta)
    gamma = drift_iterate(state.grad, state.hess_diag, state.v, state.j, cfg.alpha, cfg.eta) if cfg.use_drift else 0.0
    mu = state.theta - 0.5 * eps * g_prev * state.grad + eps * gamma
    var = eps * g_prev
    cand = mu + np.sqrt(var) * rng.standard_normal(state.theta.shape)

    accept_u = rng.random()
    g_c, grad_c, hess_c = model.potential_with_derivatives(cand)
    if not (np.isfinite(g_c) and np.all(np.isfinite(grad_c)) and np.all(np.isfinite(hess_c))):
        # zero-density candidate: reject without poisoning the variance vector
        state.j += 1
        return PmalaStepInfo(False, 0.0, cand, mu, var, None, None, 0.0, -np.inf, state.v.copy())

    v_new = rmsprop_update(state.v, grad_c, cfg.alpha)
    g_new = preconditioner(v_new, cfg.eta)
    gamma_c = drift_candidate(grad_c, hess_c, v_new, cfg.alpha, cfg.eta) if cfg.use_drift else 0.0
    mu_c = cand - 0.5 * eps * g_new * grad_c + eps * gamma_c
    var_c = eps * g_new
    log_q_fwd = _diag_gaussian_logpdf(cand, mu, var)
    log_q_rev = _diag_gaussian_logpdf(state.theta, mu_c, var_c)
    log_ratio = (state.potential - g_c) + (log_q_rev - log_q_fwd)
    accept_prob = float(min(1.0, np.exp(min(log_ratio, 0.0))))

    accepted = (accept_u <= accept_prob) if cfg.use_metropolis else True
    state.v = v_new
    if accepted:
        state.theta = cand
        state.potential, state.grad, state.hess_diag = g_c, grad_c, hess_c
        state.j[:] = 0
    else:
        state.j += 1
    return PmalaStepInfo(accepted, accept_prob, cand, mu, var, mu_c, var_c, log_q_fwd, log_q_rev, v_new)


# -- multiple-try pieces ---------------------------------------------------------


def mtm_weights(candidates: np.ndarray, conditional_log_density: Callable, proposal_log_density: Callable):
    """Log importance weights and stabilized selection probabilities.

    Returns (log_w, selection_probs); selection_probs is None when every
    candidate has zero density (the step must then reject).
    """
    cands = np.asarray(candidates, dtype=float)
    log_w = np.asarray(conditional_log_density(cands), dtype=float) - np.asarray(
        proposal_log_density(cands), dtype=float
    )
    if np.all(np.isneginf(log_w)):
        return log_w, None
    m = np.max(log_w)
    w = np.exp(log_w - m)
    return log_w, w / w.sum()


class MtmProposal:
    """Independent proposal for one component given the rest of the field."""

    def sample(self, pixel: int, theta: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def sample_class(self, pixels: np.ndarray, theta: np.ndarray, k: int, rngs: list) -> np.ndarray:
        """Batched draws for one color class; each pixel consumes only its own stream."""
        out = np.empty((pixels.size, k, theta.shape[1]))
        for row, (pixel, rng) in enumerate(zip(pixels.tolist(), rngs)):
            out[row] = self.sample(pixel, theta, k, rng)
        return out

    def log_density(self, pixels: np.ndarray, theta: np.ndarray, points: np.ndarray) -> np.ndarray:
        """(P,) pixels, (P, K, D) points -> (P, K) log densities."""
        raise NotImplementedError


class SmoothUniformProposal(MtmProposal):
    """Independent smoothed-indicator draw per dimension over the validity box."""

    def __init__(self, box, delta: float = 1e4):
        self.box = box
        self.delta = float(delta)

    def sample(self, pixel, theta, k, rng):
        return sample_smooth_uniform_box(self.box, self.delta, rng, size=k)

    def log_density(self, pixels, theta, points):
        return smooth_uniform_box_logpdf(points, self.box, self.delta)


class NeighborSubsetProposal(MtmProposal):
    """Gaussian mixture over the means of all nonempty neighbor subsets.

    Per dimension d the component for subset V is centered on the subset mean
    with precision 4 tau_d |V|; component weights are the exact integrals of
    the corresponding squared-difference factors, so sampling and density
    evaluation agree with the closed-form mixture. Subset tables are padded
    to a common count so whole color classes evaluate in one shot.
    """

    def __init__(self, graph: NeighborGraph, tau: np.ndarray):
        self.graph = graph
        self.tau = np.atleast_1d(np.asarray(tau, dtype=float))
        if np.any(self.tau <= 0):
            raise ConfigurationError("neighbor-subset proposal needs tau > 0 in every dimension")
        deg = graph.degree()
        if np.any(deg == 0):
            raise ConfigurationError("every pixel needs at least one neighbor")
        n = graph.n_nodes
        max_deg = int(deg.max())
        s_max = 2**max_deg - 1
        self._members = np.zeros((n, s_max, max_deg), dtype=np.intp)
        self._mask = np.zeros((n, s_max, max_deg), dtype=bool)
        self._valid = np.zeros((n, s_max), dtype=bool)
        for pix, vn in enumerate(graph.neighbors):
            row = 0
            for code in range(1, 2 ** vn.size):
                sel = [vn[b] for b in range(vn.size) if code >> b & 1]
                self._members[pix, row, : len(sel)] = sel
                self._mask[pix, row, : len(sel)] = True
                self._valid[pix, row] = True
                row += 1
        self._sizes = self._mask.sum(axis=2).astype(float)  # (N, S)

    def _moments(self, pixels, theta: np.ndarray):
        """Subset sums s1, s2, sizes, validity for the given pixels: (P, S, ...)."""
        vals = theta[self._members[pixels]]  # (P, S, max_deg, D)
        mask = self._mask[pixels][..., None]
        s1 = np.where(mask, vals, 0.0).sum(axis=2)  # (P, S, D)
        s2 = np.where(mask, vals * vals, 0.0).sum(axis=2)
        return s1, s2, self._sizes[pixels], self._valid[pixels]

    def _log_component_weights(self, s1, s2, sizes, valid):
        # integral of exp(-2 tau_d sum_{i in V}(x - theta_i)^2) over x
        safe = np.maximum(sizes, 1.0)[..., None]
        spread = s2 - s1 * s1 / safe
        logw = -2.0 * self.tau * spread + 0.5 * np.log(np.pi / (2.0 * self.tau * safe))
        return np.where(valid[..., None], logw, -np.inf)  # (P, S, D)

    def sample(self, pixel, theta, k, rng):
        return self.sample_class(np.array([pixel]), theta, k, [rng])[0]

    def sample_class(self, pixels, theta, k, rngs):
        p = pixels.size
        d = self.tau.size
        s1, s2, sizes, valid = self._moments(pixels, theta)
        logw = self._log_component_weights(s1, s2, sizes, valid)  # (P, S, D)
        probs = np.exp(logw - logw.max(axis=1, keepdims=True))
        cum = np.cumsum(probs, axis=1)
        cum /= cum[:, -1:, :]
        u = np.empty((p, k, d))
        noise = np.empty((p, k, d))
        for row, rng in enumerate(rngs):
            u[row] = rng.random((k, d))
            noise[row] = rng.standard_normal((k, d))
        comp = (cum[:, None, :, :] < u[:, :, None, :]).sum(axis=2)  # (P, k, D)
        pi = np.arange(p)[:, None, None]
        di = np.arange(d)[None, None, :]
        sz = sizes[pi, comp]  # (P, k, D)
        mean = s1[pi, comp, di] / sz
        std = 1.0 / np.sqrt(4.0 * self.tau * sz)
        return mean + std * noise

    def log_density(self, pixels, theta, points):
        pixels = np.atleast_1d(np.asarray(pixels, dtype=np.intp))
        pts = np.asarray(points, dtype=float)
        squeeze = pts.ndim == 2
        if squeeze:
            pts = pts[:, None, :]
        s1, s2, sizes, valid = self._moments(pixels, theta)
        logw = self._log_component_weights(s1, s2, sizes, valid)  # (P, S, D)
        m = logw.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(logw - m).sum(axis=1, keepdims=True)) + m  # (P, 1, D)
        x = pts[:, :, None, :]  # (P, K, 1, D)
        # sum_{i in V}(x - theta_i)^2 = |V| x^2 - 2 x s1 + s2
        e = sizes[:, None, :, None] * x * x - 2.0 * x * s1[:, None, :, :] + s2[:, None, :, :]
        le = np.where(valid[:, None, :, None], -2.0 * self.tau * e, -np.inf)  # (P, K, S, D)
        m2 = le.max(axis=2, keepdims=True)
        lse = np.squeeze(np.log(np.exp(le - m2).sum(axis=2, keepdims=True)) + m2, axis=2)
        out = np.sum(lse - log_z, axis=-1)
        return out[:, 0] if squeeze else out


def neighbor_subset_proposal(pixel: int, theta: np.ndarray, tau: np.ndarray,
                             graph: NeighborGraph, rng: np.random.Generator):
    """One draw plus an exact log-density callable for the given pixel."""
    prop = NeighborSubsetProposal(graph, tau)
    theta = np.asarray(theta, dtype=float)
    draw = prop.sample(pixel, theta, 1, rng)[0]

    def log_density(points):
        return prop.log_density(np.array([pixel]), theta, np.asarray(points, dtype=float)[None, ...])[0]

    return draw, log_density


def chromatic_schedule(graph: NeighborGraph) -> list[np.ndarray]:
    """Greedy coloring: partition into classes with no internal edges."""
    colors = np.full(graph.n_nodes, -1, dtype=int)
    for n in range(graph.n_nodes):
        used = {colors[i] for i in graph.neighbors[n] if colors[i] >= 0}
        c = 0
        while c in used:
            c += 1
        colors[n] = c
    return [np.flatnonzero(colors == c) for c in range(colors.max() + 1)]


@dataclass
class MtmStepInfo:
    accepted: np.ndarray  # (N,) bool
    mean_accept: float


def mtm_step(state: SamplerState, model: PosteriorModel, cfg: MtmConfig, proposal: MtmProposal,
             color_classes: list[np.ndarray], streams: RngStreams, iteration: int,
             parallel: bool = True) -> MtmStepInfo:
    """One Gibbs sweep of independent multiple-try updates over all components.

    Color classes are processed in order; within a class, components are
    conditionally independent given the rest of the field, so the batched
    (parallel) path and the per-pixel path give identical chains: both read
    the frozen field and use per-(iteration, pixel) random streams.

    Only ``state.theta`` is touched here; the caller applies the variance and
    counter bookkeeping for accepted components (it needs the new gradient).
    """
    k = cfg.n_candidates
    n_dim = model.dim
    theta = state.theta
    accepted = np.zeros(model.n_components, dtype=bool)
    for cls in color_classes:
        batches = [cls] if parallel else [np.array([n]) for n in cls.tolist()]
        for ns in batches:
            p = ns.size
            points = np.empty((p, k + 1, n_dim))
            gens = [streams.pixel(iteration, n) for n in ns.tolist()]
            points[:, :k] = proposal.sample_class(ns, theta, k, gens)
            u_sel = np.array([g.random() for g in gens])
            u_acc = np.array([g.random() for g in gens])
            points[:, k] = theta[ns]
            cond = model.conditional_log_density(ns, points, theta)
            prop = proposal.log_density(ns, theta, points)
            with np.errstate(invalid="ignore"):
                log_w = cond - prop
            w_cand = log_w[:, :k]
            # current-point weight: a zero-density proposal there means +inf
            w_old = np.where(np.isneginf(prop[:, k]), np.inf, log_w[:, k])
            w_old = np.where(np.isnan(w_old), np.inf, w_old)

            finite_any = ~np.all(np.isneginf(w_cand), axis=1)
            sel = np.zeros(p, dtype=np.intp)
            if np.any(finite_any):
                m = np.max(w_cand, axis=1, keepdims=True)
                wexp = np.exp(np.where(np.isneginf(w_cand), -np.inf, w_cand) - m)
                totals = wexp.sum(axis=1, keepdims=True)
                cum = np.cumsum(wexp, axis=1) / totals
                sel = np.minimum((cum < u_sel[:, None]).sum(axis=1), k - 1).astype(np.intp)
            log_num = logsumexp(w_cand, axis=1)
            excl = w_cand.copy()
            excl[np.arange(p), sel] = -np.inf
            log_excl = logsumexp(excl, axis=1) if k > 1 else np.full(p, -np.inf)
            with np.errstate(invalid="ignore"):
                log_den = np.logaddexp(w_old, log_excl)
                log_r = log_num - log_den
            log_r = np.where(np.isnan(log_r), -np.inf, log_r)
            with np.errstate(divide="ignore"):
                ok = finite_any & (np.log(u_acc) < log_r)
            moved = ns[ok]
            theta[moved] = points[np.flatnonzero(ok), sel[ok]]
            accepted[moved] = True
    return MtmStepInfo(accepted=accepted, mean_accept=float(accepted.mean()))


# -- hybrid sampler ---------------------------------------------------------------


class StepSizeAdapter:
    """Dual-averaging step-size adaptation toward a target acceptance rate.

    Active during burn-in only; the averaged step size is frozen afterwards
    so the post-burn-in kernel is time-homogeneous.
    """

    def __init__(self, eps0: float, target: float = 0.574, gamma: float = 0.05,
                 t0: float = 10.0, kappa: float = 0.75):
        self.mu = float(np.log(10.0 * eps0))
        self.target = target
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.h_bar = 0.0
        self.log_eps_bar = float(np.log(eps0))
        self.m = 0
        self.eps = eps0

    def update(self, accept_prob: float) -> float:
        self.m += 1
        frac = 1.0 / (self.m + self.t0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_prob)
        log_eps = self.mu - np.sqrt(self.m) / self.gamma * self.h_bar
        w = self.m ** (-self.kappa)
        self.log_eps_bar = w * log_eps + (1.0 - w) * self.log_eps_bar
        self.eps = float(np.exp(log_eps))
        return self.eps

    def restart(self) -> None:
        """Re-anchor at the current average; the early far-from-equilibrium
        phase would otherwise dominate the frozen value."""
        eps = self.frozen()
        self.mu = float(np.log(10.0 * eps))
        self.log_eps_bar = float(np.log(eps))
        self.h_bar = 0.0
        self.m = 0
        self.eps = eps

    def frozen(self) -> float:
        return float(np.exp(self.log_eps_bar))

    def state(self) -> dict:
        return {"mu": self.mu, "h_bar": self.h_bar, "log_eps_bar": self.log_eps_bar,
                "m": self.m, "eps": self.eps}

    def restore(self, d: dict) -> None:
        self.mu, self.h_bar = d["mu"], d["h_bar"]
        self.log_eps_bar, self.m, self.eps = d["log_eps_bar"], d["m"], d["eps"]


def make_proposal(cfg: MtmConfig, model: PosteriorModel) -> MtmProposal:
    if cfg.proposal == "smooth-uniform-box":
        if model.box is None:
            raise ConfigurationError("smooth-uniform proposal requires the model to expose a box")
        return SmoothUniformProposal(model.box, cfg.proposal_delta)
    graph = model.graph
    if graph is None:
        raise ConfigurationError("neighbor-subset proposal requires a dependence graph")
    tau = getattr(getattr(model, "prior", None), "tau", None)
    if tau is None:
        raise ConfigurationError("neighbor-subset proposal requires spatial weights tau")
    return NeighborSubsetProposal(graph, tau)


def hybrid_sampler(model: PosteriorModel, cfg: HybridConfig, theta0: np.ndarray, seed: int,
                   checkpoint_path: str | Path | None = None, meta: dict | None = None) -> ChainRecord:
    """Run the mixed PMALA/MTM chain and record every iterate.

    ``seed`` drives a master stream (kernel choices, PMALA noise) plus
    counter-keyed per-(iteration, pixel) streams for the MTM sweeps; fixed
    seeds give bitwise-identical chains.
    """
    streams = RngStreams(seed)
    state = SamplerState.initialize(model, theta0)
    return _run_chain(model, cfg, state, streams, start_iteration=1,
                      record=_empty_record(model, cfg, theta0, seed, meta),
                      adapter_state=None, checkpoint_path=checkpoint_path)


def resume_hybrid_sampler(checkpoint_path: str | Path, model: PosteriorModel) -> ChainRecord:
    """Continue an interrupted run; the completed chain is bitwise identical
    to an uninterrupted one."""
    data = np.load(checkpoint_path, allow_pickle=False)
    cfg_d = json.loads(str(data["cfg_json"]))
    cfg = HybridConfig(
        p_mtm=cfg_d["p_mtm"], pmala=PmalaConfig(**cfg_d["pmala"]), mtm=MtmConfig(**cfg_d["mtm"]),
        iterations=cfg_d["iterations"], burn_in=cfg_d["burn_in"],
        checkpoint_every=cfg_d["checkpoint_every"], parallel=cfg_d["parallel"],
        record_layout=cfg_d["record_layout"],
    )
    seed = int(data["seed"])
    t_done = int(data["t_done"])
    streams = RngStreams(seed)
    streams.restore_master(json.loads(str(data["master_state"])))
    state = SamplerState(
        theta=data["theta"], v=data["v"], j=data["j"], potential=float(data["potential"]),
        grad=data["grad"], hess_diag=data["hess_diag"],
    )
    record = _empty_record(model, cfg, data["thetas"][0], seed, json.loads(str(data["meta_json"])))
    record.thetas[: t_done + 1] = data["thetas"][: t_done + 1]
    record.kernels[:t_done] = data["kernels"][:t_done]
    record.accepted[:t_done] = data["accepted"][:t_done]
    adapter_state = json.loads(str(data["adapter_json"])) if str(data["adapter_json"]) else None
    return _run_chain(model, cfg, state, streams, start_iteration=t_done + 1, record=record,
                      adapter_state=adapter_state, checkpoint_path=checkpoint_path)


def _empty_record(model, cfg, theta0, seed, meta) -> ChainRecord:
    t = cfg.iterations
    thetas = np.empty((t + 1, model.n_components, model.dim))
    thetas[0] = np.asarray(theta0, dtype=float)
    return ChainRecord(
        thetas=thetas,
        kernels=np.zeros(t, dtype=np.int8),
        accepted=np.zeros((t, model.n_components), dtype=bool),
        burn_in=cfg.burn_in,
        seed=int(seed),
        meta=dict(meta or {}),
    )


def _save_checkpoint(path, record, state, streams, cfg, t_done, adapter):
    cfg_json = json.dumps({
        "p_mtm": cfg.p_mtm,
        "pmala": {k: getattr(cfg.pmala, k) for k in (
            "epsilon", "alpha", "eta", "tune_step_size", "target_acceptance", "use_drift", "use_metropolis")},
        "mtm": {"n_candidates": cfg.mtm.n_candidates, "proposal": cfg.mtm.proposal,
                 "proposal_delta": cfg.mtm.proposal_delta},
        "iterations": cfg.iterations, "burn_in": cfg.burn_in,
        "checkpoint_every": cfg.checkpoint_every, "parallel": cfg.parallel,
        "record_layout": cfg.record_layout,
    })
    tmp = Path(str(path) + ".tmp.npz")  # savez appends .npz to other suffixes
    np.savez(
        tmp, thetas=record.thetas, kernels=record.kernels, accepted=record.accepted,
        theta=state.theta, v=state.v, j=state.j, potential=state.potential,
        grad=state.grad, hess_diag=state.hess_diag, t_done=t_done, seed=record.seed,
        master_state=json.dumps(streams.master_state()), cfg_json=cfg_json,
        meta_json=json.dumps(record.meta), adapter_json=json.dumps(adapter.state()) if adapter else "",
    )
    tmp.replace(path)


def _run_chain(model, cfg, state, streams, start_iteration, record, adapter_state, checkpoint_path):
    proposal = make_proposal(cfg.mtm, model) if cfg.p_mtm > 0 else None
    classes = chromatic_schedule(model.dependence_graph()) if cfg.p_mtm > 0 else []
    adapter = None
    eps = cfg.pmala.epsilon
    if cfg.pmala.tune_step_size:
        adapter = StepSizeAdapter(cfg.pmala.epsilon, target=cfg.pmala.target_acceptance)
        if adapter_state:
            adapter.restore(adapter_state)
        eps = adapter.frozen() if start_iteration > cfg.burn_in else adapter.eps

    alpha = cfg.pmala.alpha
    for t in range(start_iteration, cfg.iterations + 1):
        use_mtm = streams.master.random() < cfg.p_mtm
        if use_mtm:
            info = mtm_step(state, model, cfg.mtm, proposal, classes, streams, t, parallel=cfg.parallel)
            record.kernels[t - 1] = 1
            record.accepted[t - 1] = info.accepted
            if np.any(info.accepted):
                g, grad, hess = model.potential_with_derivatives(state.theta)
                if not np.isfinite(g):
                    raise NumericalError("potential became non-finite after an MTM sweep")
                acc = info.accepted
                state.v[acc] = alpha * state.v[acc] + (1.0 - alpha) * grad[acc] ** 2
                state.j[acc] = 0
                state.potential, state.grad, state.hess_diag = g, grad, hess
        else:
            info = pmala_step(state, model, cfg.pmala, streams.master, epsilon=eps)
            record.kernels[t - 1] = 0
            record.accepted[t - 1] = info.accepted
            if adapter is not None and t <= cfg.burn_in:
                eps = adapter.update(info.accept_prob)
        if adapter is not None and t == cfg.burn_in // 2:
            adapter.restart()
            eps = adapter.eps
        if adapter is not None and t == cfg.burn_in:
            eps = adapter.frozen()
        record.thetas[t] = state.theta
        if checkpoint_path is not None and (t % cfg.checkpoint_every == 0 or t == cfg.iterations):
            _save_checkpoint(checkpoint_path, record, state, streams, cfg, t, adapter)
    record.meta.setdefault("pmala", {})["epsilon_final"] = eps
    return record
