"""Active transmit beamforming: convex QCQP solved by Lagrangian dual ascent.

With the auxiliaries fixed, the precoder subproblem is

    min_W  f5(W) = sum_i Tr(Ws_i^H A Ws_i) - 2 Re sum_i Tr(C_i^H Ws_i)
    s.t.   sum_k ||W[l, k]||_F^2 <= p_max[l]  for every BS l,

where Ws_i stacks W[:, i] over base stations, A = sum_k Hs_k Y_k Ubar_k
Y_k^H Hs_k^H and C_i = Hs_i Y_i Ubar_i. The problem is convex with zero
duality gap, so a projected sub-gradient ascent on the per-BS multipliers
with the closed-form primal

    Ws_i(lambda) = (A + blockdiag(lambda_l I))^{-1} C_i

converges to the optimum. The quadratic matrix A couples base stations, so
the primal solve is joint; a per-BS block inverse is not a stationary point
of the Lagrangian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .config import SystemConfig
from .fp_core import AuxState
from .model import BeamformerSet

_EIG_FLOOR = 1e-10


@dataclass
class DualState:
    """Per-BS multipliers and step sizes of the dual ascent."""

    lam: np.ndarray       # (L,) nonnegative
    tau: np.ndarray       # (L,) positive step sizes
    iteration: int = 0

    def __post_init__(self):
        self.lam = np.asarray(self.lam, float).copy()
        self.tau = np.asarray(self.tau, float).copy()
        if (self.lam < 0).any():
            raise ValueError("dual variables must be nonnegative")
        if (self.tau <= 0).any():
            raise ValueError("step sizes must be positive")


@dataclass
class QuadraticForm:
    """Cached pieces of f5 for a fixed (theta, U, Y)."""

    a: np.ndarray        # (L*m_b, L*m_b) Hermitian PSD
    c: np.ndarray        # (K, L*m_b, m_u)
    l: int
    m_b: int

    @classmethod
    def build(cls, h: np.ndarray, aux: AuxState) -> "QuadraticForm":
        L, K, Mb, Mu = h.shape
        hs = h.transpose(1, 0, 2, 3).reshape(K, L * Mb, Mu)
        ubar = aux.ubar
        a = np.zeros((L * Mb, L * Mb), complex)
        c = np.zeros((K, L * Mb, Mu), complex)
        for k in range(K):
            hyu = hs[k] @ aux.y[k]
            a += hyu @ ubar[k] @ hyu.conj().T
            c[k] = hyu @ ubar[k]
        a = 0.5 * (a + a.conj().T)
        return cls(a=a, c=c, l=L, m_b=Mb)

    def value(self, w) -> float:
        ws = self._stacked(w)
        val = 0.0
        for i in range(ws.shape[0]):
            val += np.trace(ws[i].conj().T @ self.a @ ws[i]).real
            val -= 2.0 * np.trace(self.c[i].conj().T @ ws[i]).real
        return val

    def _stacked(self, w) -> np.ndarray:
        w = model._w_array(w)
        L, K, Mb, Mu = w.shape
        return w.transpose(1, 0, 2, 3).reshape(K, L * Mb, Mu)

    def solve(self, lam: np.ndarray) -> np.ndarray:
        """Stationary precoders (L, K, m_b, m_u) at the given multipliers."""
        dim = self.l * self.m_b
        reg = np.repeat(np.asarray(lam, float), self.m_b)
        m = self.a + np.diag(reg)
        K, Mu = self.c.shape[0], self.c.shape[2]
        rhs = self.c.transpose(1, 0, 2).reshape(dim, K * Mu)
        try:
            sol = np.linalg.solve(m, rhs)
        except np.linalg.LinAlgError:
            sol = _floored_solve(m, rhs)
        if not np.isfinite(sol).all():
            sol = _floored_solve(m, rhs)
        ws = sol.reshape(dim, K, Mu).transpose(1, 0, 2)
        return ws.reshape(K, self.l, self.m_b, Mu).transpose(1, 0, 2, 3)


def _floored_solve(m: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Pseudo-inverse solve with a floor on small eigenvalues; handles the
    lambda = 0, rank-deficient corner."""
    vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    floor = max(_EIG_FLOOR, _EIG_FLOOR * float(vals.max(initial=0.0)))
    vals = np.maximum(vals, floor)
    return vecs @ ((vecs.conj().T @ rhs) / vals[:, None])


def eval_f5(h: np.ndarray, w, aux: AuxState) -> float:
    """Convex quadratic objective of the precoder subproblem (lower is better)."""
    return QuadraticForm.build(h, aux).value(w)


def primal_w(dual: DualState, h: np.ndarray, aux: AuxState) -> BeamformerSet:
    """Closed-form minimizer of the Lagrangian at fixed multipliers."""
    form = QuadraticForm.build(h, aux)
    return BeamformerSet(w=form.solve(dual.lam))


def dual_step(state: DualState, w, p_max) -> DualState:
    """Projected sub-gradient ascent step on the power multipliers."""
    power = BeamformerSet(w=model._w_array(w)).per_bs_power()
    violation = power - np.asarray(p_max, float)
    lam = np.maximum(0.0, state.lam + state.tau * violation)
    return DualState(lam=lam, tau=state.tau, iteration=state.iteration + 1)


def _enforce_power(w: np.ndarray, p_max) -> np.ndarray:
    """Scale down any BS block that exceeds its budget (no-op when feasible)."""
    power = np.sum(np.abs(w) ** 2, axis=(1, 2, 3))
    out = w.copy()
    for l, (p, cap) in enumerate(zip(power, p_max)):
        if p > cap * (1.0 + 1e-9) and p > 0:
            out[l] *= math.sqrt(cap / p)
    return out


def _converged(lam_new: np.ndarray, lam_old: np.ndarray, eps1: float) -> bool:
    ok = True
    for new, old in zip(lam_new, lam_old):
        if new > eps1:
            ok &= abs(new - old) / new < eps1
        else:
            ok &= abs(new - old) < eps1
    return ok


def optimize_w(
    h: np.ndarray,
    aux: AuxState,
    config: SystemConfig,
    dual: DualState = None,
    w_prev=None,
    strategy: str = "subgradient",
):
    """Solve the precoder subproblem.

    Alternates the closed-form primal with per-BS dual updates until the
    multipliers stabilize (relative test, absolute when a multiplier sits at
    zero) or ``config.max_dual`` iterations. Step sizes adapt geometrically
    (halved on a sign flip of the violation, grown while it persists) and
    each multiplier moves at most one decade per iteration; if the loop still
    fails to settle, a bisection pass finishes the job.

    strategy="bisection" instead drives each multiplier to complementary
    slackness by bisection on the (monotone) per-BS power curve.

    Returns (BeamformerSet, DualState, info) where info carries iteration
    count, convergence flag, f5 value, and slackness residuals. The returned
    precoders are always power-feasible; if the new solution is no better
    than ``w_prev`` in f5, ``w_prev`` is returned unchanged (block ascent).
    """
    form = QuadraticForm.build(h, aux)
    p_max = np.asarray(config.p_max, float)
    # In the decoupled limit power_l(lam) ~ ||C_l||_F^2 / lam^2, so
    # ||C_l||_F / sqrt(p_l) is the natural magnitude of an active multiplier.
    c_bs = form.c.reshape(-1, config.l, config.m_b, form.c.shape[2])
    lam_scale = np.sqrt(np.sum(np.abs(c_bs) ** 2, axis=(0, 2, 3)) / p_max)
    lam_scale = np.maximum(lam_scale, 1e-30)
    if dual is None:
        dual = DualState(lam=lam_scale.copy(), tau=np.asarray(config.tau, float))

    if strategy == "bisection":
        lam, w, iters, converged = _bisection_duals(form, dual.lam, p_max, config)
        dual = DualState(lam=lam, tau=dual.tau, iteration=dual.iteration + iters)
    elif strategy == "subgradient":
        lam = dual.lam.copy()
        tau = dual.tau.copy()
        # Multipliers below the floor count as zero (the power curve is flat
        # there); the floor keeps the multiplicative trust region usable.
        lam_floor = 1e-14 * lam_scale
        tau_cap = 1e9 * np.asarray(config.tau, float)
        prev_sign = np.zeros(config.l)
        converged = False
        iters = 0
        for iters in range(1, config.max_dual + 1):
            lam_eff = np.where(lam > lam_floor, lam, 0.0)
            w = form.solve(lam_eff)
            power = np.sum(np.abs(w) ** 2, axis=(1, 2, 3))
            f_l = power - p_max
            sign = np.sign(f_l)
            # Halve the step whenever a violation changes sign, grow it while
            # the sign persists: a geometric bracket on the monotone f_l that
            # keeps the sub-gradient rule from creeping after an overshoot.
            flip = (sign * prev_sign) < 0
            same = (sign * prev_sign) > 0
            tau[flip] *= 0.5
            tau[same] = np.minimum(tau[same] * 2.0, tau_cap[same])
            prev_sign = sign
            anchor = np.maximum(lam, lam_floor)
            raw = anchor + tau * f_l
            # The violation is heavily asymmetric around the optimum (bounded
            # by -p_max above it, arbitrarily large below), so each additive
            # step is confined to one decade around the current multiplier. A
            # sleeping multiplier facing a violation restarts at its scale.
            lam_new = np.clip(raw, anchor / 10.0, anchor * 10.0)
            wake = (lam <= lam_floor) & (f_l > 0)
            lam_new[wake] = np.maximum(lam_new[wake], lam_scale[wake])
            lam_new = np.maximum(lam_new, lam_floor)
            if _converged(np.where(lam_new > lam_floor, lam_new, 0.0), lam_eff, config.eps1):
                lam = lam_new
                converged = True
                break
            lam = lam_new
        lam = np.where(lam > lam_floor, lam, 0.0)
        if not converged:
            lam, w, extra, converged = _bisection_duals(form, lam, p_max, config)
            iters += extra
        # Exact complementary slackness for constraints that converged to a
        # negligible multiplier: zero them outright when feasibility allows.
        # (The multiplier decay stops once its steps drop below eps1.)
        cutoff = np.maximum(1e-2 * lam_scale, 10.0 * config.eps1)
        small = (lam > 0.0) & (lam < cutoff)
        if small.any():
            trial = np.where(small, 0.0, lam)
            trial_power = np.sum(np.abs(form.solve(trial)) ** 2, axis=(1, 2, 3))
            if (trial_power <= p_max * (1.0 + 1e-9)).all():
                lam = trial
        w = form.solve(lam)
        dual = DualState(lam=lam, tau=tau, iteration=dual.iteration + iters)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    w = _enforce_power(w, p_max)
    if w_prev is not None:
        w_prev_arr = model._w_array(w_prev)
        if form.value(w_prev_arr) < form.value(w):
            w = w_prev_arr.copy()
    power = np.sum(np.abs(w) ** 2, axis=(1, 2, 3))
    info = {
        "iterations": int(dual.iteration),
        "converged": bool(converged),
        "f5": form.value(w),
        "slackness": dual.lam * (power - p_max),
        "power": power,
    }
    return BeamformerSet(w=w), dual, info


def _bisection_duals(form, lam0, p_max, config, rounds: int = 12, tol: float = 1e-11):
    """Gauss-Seidel bisection: per BS, drive lambda_l to the root of the
    (monotone, non-increasing) power violation, or to zero when the
    constraint is slack there."""
    L = p_max.size
    lam = lam0.copy()
    iters = 0

    def power_at(l, value):
        nonlocal iters
        trial = lam.copy()
        trial[l] = value
        iters += 1
        return float(np.sum(np.abs(form.solve(trial)[l]) ** 2))

    for _ in range(rounds):
        moved = 0.0
        for l in range(L):
            old = lam[l]
            if power_at(l, 0.0) <= p_max[l]:
                lam[l] = 0.0
            else:
                hi = max(old, 1.0)
                while power_at(l, hi) > p_max[l] and hi < 1e18:
                    hi *= 2.0
                lo = 0.0
                for _ in range(100):
                    mid = 0.5 * (lo + hi)
                    if power_at(l, mid) > p_max[l]:
                        lo = mid
                    else:
                        hi = mid
                    if hi - lo <= tol * max(hi, 1.0):
                        break
                lam[l] = hi
            moved = max(moved, abs(lam[l] - old))
        if moved <= tol * max(1.0, float(np.max(lam))):
            break
    return lam, form.solve(lam), iters, True
