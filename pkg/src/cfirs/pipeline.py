"""Outer alternating optimization and Monte-Carlo experiment orchestration.

One outer iteration updates, in order: the auxiliary matrices U (SINR) and Y
(MMSE filters), the transmit precoders (dual sub-gradient), and the
reflection phases (per the scheme's solver). With exact phase solvers the
achieved sum rate is monotonically non-decreasing across iterations; rounded
solvers (QCR, SDR) are safeguarded by accepting a phase step only when it
does not decrease the quadratic phase objective.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from . import channel as chan
from . import fp_core, irs_opt, model, tx_opt
from .channel import ChannelSet, Geometry
from .config import SystemConfig
from .model import BeamformerSet, PhaseVector

PHASE_SOLVERS = ("aso", "qcr", "sdr", "discrete", "random", "none")


@dataclass(frozen=True)
class SchemeSpec:
    """How one optimization scheme treats the reflecting surfaces.

    solver:
      aso / qcr / sdr  - optimize phases each outer iteration
      discrete         - ASO-style sweep restricted to ``levels`` grid phases
      random           - keep the random initial phases, optimize W only
      none             - no reflected path at all (IRS-free baseline)
    csi_error_rho: bounded channel-estimation error ratio; optimization runs
      on the perturbed channels, reported rates use the true ones.
    """

    solver: str = "aso"
    levels: int = 0
    csi_error_rho: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.solver not in PHASE_SOLVERS:
            raise ValueError(f"unknown phase solver {self.solver!r}")
        if self.solver == "discrete" and self.levels < 2:
            raise ValueError("discrete scheme needs levels >= 2")
        if self.csi_error_rho < 0:
            raise ValueError("csi_error_rho must be >= 0")
        if not self.label:
            label = self.solver.upper()
            if self.solver == "discrete":
                label += f"-M{self.levels}"
            if self.csi_error_rho > 0:
                label += f" rho={self.csi_error_rho:g}"
            object.__setattr__(self, "label", label)


@dataclass
class RunTrace:
    """Per-iteration accounting of one joint optimization run."""

    sum_rate: list = field(default_factory=list)      # nats, on the channels optimized
    f3: list = field(default_factory=list)            # surrogate at the loop point
    dual_iterations: list = field(default_factory=list)
    phase_sweeps: list = field(default_factory=list)
    stage_seconds: dict = field(default_factory=lambda: {"u": 0.0, "y": 0.0, "w": 0.0, "theta": 0.0})
    converged: bool = False
    iterations: int = 0
    final_sum_rate_true: float = 0.0                  # nats, on the true channels


def _init_theta(config: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    phases = rng.uniform(0.0, 2.0 * np.pi, config.n_irs_total)
    return config.alpha * np.exp(1j * phases)


def _phase_step(scheme, theta, data, config, rng):
    """One phase update; returns (theta, sweeps). QCR/SDR steps are kept only
    if they do not decrease the phase objective.

    The sweep tolerance is config.eps2 scaled by the current objective
    magnitude, so the stopping rule keeps the same meaning across power and
    array-size regimes.
    """
    eps2 = config.eps2 * max(1.0, abs(irs_opt.eval_f7(theta, data)))
    if scheme.solver == "aso":
        new, trace = irs_opt.aso_solve(theta, data, eps2=eps2, max_sweeps=config.max_aso)
        return new, len(trace) - 1
    if scheme.solver == "discrete":
        levels = scheme.levels if scheme.levels >= 2 else config.discrete_levels
        new, sweeps = irs_opt.discrete_sweep(theta, data, levels, max_sweeps=config.max_aso)
        return new, sweeps
    if scheme.solver == "qcr":
        new, _, trace = irs_opt.qcr_solve(theta, data)
        sweeps = len(trace) - 1
    elif scheme.solver == "sdr":
        new, _, _ = irs_opt.sdr_solve(data, config.alpha, rng=rng)
        sweeps = 1
    else:
        return theta, 0
    if irs_opt.eval_f7(new, data) >= irs_opt.eval_f7(theta, data):
        return new, sweeps
    return theta, 0


def joint_optimize(
    channels: ChannelSet,
    config: SystemConfig,
    scheme: SchemeSpec,
    rng: np.random.Generator,
    n_starts: int = 1,
):
    """Run the alternating optimizer for one channel realization.

    Returns (BeamformerSet, PhaseVector, RunTrace). The trace's rate sequence
    refers to the channels the optimizer saw (perturbed when
    scheme.csi_error_rho > 0); ``final_sum_rate_true`` is always evaluated on
    the true channels.

    ``n_starts`` > 1 restarts from fresh random phases and keeps the start
    with the best rate on the optimizer's channels (the true channels are
    never consulted for the choice). All starts share one channel estimate.
    """
    channels.validate(config)
    # The perturbation draw happens even at rho = 0 so that sweeps over rho
    # share both the channel realization and the error direction.
    opt_channels = chan.apply_csi_error(channels, scheme.csi_error_rho, rng)
    best = None
    for _ in range(max(1, n_starts)):
        w, theta, trace = _optimize_once(channels, opt_channels, config, scheme, rng)
        if best is None or trace.sum_rate[-1] > best[2].sum_rate[-1]:
            best = (w, theta, trace)
    return best


def _optimize_once(channels, opt_channels, config, scheme, rng):
    use_irs = scheme.solver != "none" and config.r > 0
    theta = _init_theta(config, rng) if use_irs else None
    has_phase_step = scheme.solver in ("aso", "qcr", "sdr", "discrete") and use_irs

    h = model.effective_channel(opt_channels, theta)
    w = model.matched_filter_init(h, config.p_max)
    stacked = model.stack(opt_channels) if has_phase_step else None

    trace = RunTrace()
    rate = model.sum_rate(opt_channels, w, theta, config.sigma2)
    trace.sum_rate.append(rate)
    dual = None
    for it in range(1, config.max_outer + 1):
        t0 = time.perf_counter()
        gamma = model.sinr(h, w, config.sigma2)
        u = fp_core.update_u(gamma)
        t1 = time.perf_counter()
        y = fp_core.update_y(h, w, config.sigma2)
        aux = fp_core.AuxState(u=u, y=y)
        t2 = time.perf_counter()
        if dual is not None:
            # Warm-start the multipliers only; step sizes restart each outer
            # iteration so earlier oscillation damping cannot stall the duals.
            dual = tx_opt.DualState(lam=dual.lam, tau=np.asarray(config.tau, float))
        w, dual, winfo = tx_opt.optimize_w(h, aux, config, dual=dual, w_prev=w)
        t3 = time.perf_counter()
        sweeps = 0
        if has_phase_step:
            data = irs_opt.build_cmcqp(stacked, w, aux)
            theta, sweeps = _phase_step(scheme, theta, data, config, rng)
            h = model.effective_channel(opt_channels, theta)
        t4 = time.perf_counter()

        trace.stage_seconds["u"] += t1 - t0
        trace.stage_seconds["y"] += t2 - t1
        trace.stage_seconds["w"] += t3 - t2
        trace.stage_seconds["theta"] += t4 - t3
        trace.dual_iterations.append(winfo["iterations"])
        trace.phase_sweeps.append(sweeps)
        trace.f3.append(fp_core.eval_f3(w, theta, aux, opt_channels, config.sigma2))

        new_rate = model.sum_rate(opt_channels, w, theta, config.sigma2)
        trace.sum_rate.append(new_rate)
        trace.iterations = it
        if new_rate != 0 and abs(new_rate - rate) / abs(new_rate) < config.eps3:
            trace.converged = True
            rate = new_rate
            break
        rate = new_rate

    trace.final_sum_rate_true = model.sum_rate(channels, w, theta, config.sigma2)
    theta_out = PhaseVector(
        theta=theta if theta is not None else np.zeros(0, complex),
        alpha=config.alpha,
    )
    return w, theta_out, trace


def scheme_seed_key(master_seed: int, seed_index: int, label: str) -> np.random.SeedSequence:
    """Child seed for one (realization, scheme) pair.

    The scheme enters through a stable digest of its label, so adding or
    reordering schemes never changes the draws of the others.
    """
    digest = int.from_bytes(hashlib.sha256(label.encode()).digest()[:8], "big")
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(1, seed_index, digest))


def channel_seed_key(master_seed: int, seed_index: int) -> np.random.SeedSequence:
    """Child seed for the shared channel realization of one Monte-Carlo draw."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(0, seed_index))


def realize_channels(
    config: SystemConfig, geometry: Geometry, master_seed: int, seed_index: int
) -> ChannelSet:
    """Sample the shared (UE positions, angles, fading) realization."""
    rng = np.random.default_rng(channel_seed_key(master_seed, seed_index))
    geo = chan.sample_ue_positions(geometry, rng)
    angles = chan.sample_angles(config, rng)
    return chan.sample_channels(config, geo, angles, rng)


def monte_carlo(
    config: SystemConfig,
    geometry: Geometry,
    schemes,
    n_seeds: int,
    master_seed: int = 0,
    n_starts: int = 1,
):
    """Run every scheme on the same channel realizations.

    Returns a list of row dicts keyed by (scheme, seed), carrying the rate on
    the true channels in both nats and bits, iteration count, wall time, and
    the convergence flag. Rows for one seed share the channel draw, so
    per-seed scheme differences are paired.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    rows = []
    for seed_index in range(n_seeds):
        channels = realize_channels(config, geometry, master_seed, seed_index)
        for scheme in schemes:
            rng = np.random.default_rng(
                scheme_seed_key(master_seed, seed_index, scheme.label)
            )
            start = time.perf_counter()
            _, _, trace = joint_optimize(channels, config, scheme, rng, n_starts=n_starts)
            wall_ms = (time.perf_counter() - start) * 1e3
            rows.append(
                {
                    "scheme": scheme.label,
                    "seed": seed_index,
                    "sum_rate_nats": trace.final_sum_rate_true,
                    "sum_rate_bits": trace.final_sum_rate_true / np.log(2.0),
                    "iterations": trace.iterations,
                    "converged": trace.converged,
                    "wall_ms": wall_ms,
                }
            )
    return rows


def aggregate(rows, key: str = "sum_rate_bits"):
    """Mean and standard error of ``key`` per scheme label."""
    by_scheme = {}
    for row in rows:
        by_scheme.setdefault(row["scheme"], []).append(row[key])
    out = {}
    for label, values in by_scheme.items():
        arr = np.asarray(values, float)
        stderr = arr.std(ddof=1) / np.sqrt(arr.size) if arr.size > 1 else 0.0
        out[label] = {"mean": float(arr.mean()), "stderr": float(stderr), "count": arr.size}
    return out
