"""Passive reflecting beamforming: constant-modulus quadratic programming.

For fixed precoders and auxiliaries, the phase subproblem reduces to

    max_theta  f7(theta) = -theta^H Zcal theta + 2 Re{theta^H omega}
    s.t.       |theta_i| = alpha  for every reflection coefficient,

with Zcal = Z o Q^T (Hadamard product of two PSD matrices, hence Hermitian
PSD) and omega the diagonal of E - A. Four solvers are provided:

* coordinate descent with the closed-form per-element phase update
  theta_i = alpha * exp(j * arg(mu_i)) (exact per-coordinate maximizer),
* projected gradient on the disc relaxation |theta_i| <= alpha followed by a
  projection onto the modulus circle,
* semidefinite relaxation solved by ADMM plus Gaussian randomization,
* exhaustive per-coordinate search over a discrete phase grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model
from .fp_core import AuxState
from .model import StackedChannels


@dataclass(frozen=True)
class CmcQpData:
    """Quadratic form of the phase subproblem plus build intermediates.

    zcal is Hermitian PSD; omega holds the diagonal of E - A. The z, q, a, e
    intermediates are retained so tests can rebuild the trace forms.
    """

    zcal: np.ndarray   # (RN, RN)
    omega: np.ndarray  # (RN,)
    z: np.ndarray
    q: np.ndarray
    a: np.ndarray
    e: np.ndarray


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def build_cmcqp(stacked: StackedChannels, w, aux: AuxState) -> CmcQpData:
    """Assemble (Zcal, omega) from the stacked system.

    Z  = sum_k G_k Y_k Ubar_k Y_k^H G_k^H
    Q  = S Wcov S^H with Wcov = sum_i Ws_i Ws_i^H
    A  = sum_k G_k Y_k Ubar_k Y_k^H D_k^H Wcov S^H
    E  = sum_k G_k Y_k Ubar_k Ws_k^H S^H
    """
    warr = model._w_array(w)
    L, K, Mb, Mu = warr.shape
    ws = warr.transpose(1, 0, 2, 3).reshape(K, L * Mb, Mu)
    nn = stacked.s.shape[0]
    ubar = aux.ubar

    wcov = np.zeros((L * Mb, L * Mb), complex)
    for i in range(K):
        wcov += ws[i] @ ws[i].conj().T
    wcov = _hermitize(wcov)

    z = np.zeros((nn, nn), complex)
    a = np.zeros((nn, nn), complex)
    e = np.zeros((nn, nn), complex)
    s_herm = stacked.s.conj().T  # (L*Mb, RN)
    for k in range(K):
        gyu = stacked.g_k[k] @ aux.y[k] @ ubar[k]          # (RN, Mu)
        gyuy = gyu @ aux.y[k].conj().T                     # (RN, Mu)
        z += gyuy @ stacked.g_k[k].conj().T
        a += gyuy @ stacked.d_k[k].conj().T @ wcov @ s_herm
        e += gyu @ ws[k].conj().T @ s_herm
    z = _hermitize(z)
    q = _hermitize(stacked.s @ wcov @ stacked.s.conj().T)
    omega = np.diag(e - a).copy()
    zcal = _hermitize(z * q.T)
    return CmcQpData(zcal=zcal, omega=omega, z=z, q=q, a=a, e=e)


def eval_f7(theta, data: CmcQpData) -> float:
    """Quadratic phase objective; concave over the torus (Zcal is PSD)."""
    th = model._theta_array(theta)
    if th is None or th.size == 0:
        return 0.0
    quad = np.real(th.conj() @ data.zcal @ th)
    lin = 2.0 * np.real(th.conj() @ data.omega)
    return float(lin - quad)


def _alpha_of(theta: np.ndarray) -> float:
    mags = np.abs(theta)
    alpha = float(mags[0]) if mags.size else 1.0
    if mags.size and np.max(np.abs(mags - alpha)) > 1e-9 * max(alpha, 1.0):
        raise ValueError("starting point must have constant modulus")
    return alpha


def aso_coordinate(theta: np.ndarray, i: int, data: CmcQpData) -> np.ndarray:
    """Replace coordinate i by its exact closed-form maximizer.

    mu_i = omega_i - sum_{n != i} Zcal[i, n] theta_n; the optimal phase is
    arg(mu_i). A vanishing mu_i leaves the coordinate untouched (any phase is
    then optimal).
    """
    out = np.array(theta, copy=True)
    alpha = abs(theta[i])
    mu = data.omega[i] - data.zcal[i] @ theta + data.zcal[i, i] * theta[i]
    if mu != 0:
        out[i] = alpha * np.exp(1j * np.angle(mu))
    return out


def aso_solve(theta0, data: CmcQpData, eps2: float = 1e-8, max_sweeps: int = 200):
    """Cyclic coordinate ascent until the objective stalls.

    Returns (theta, trace) where trace[u] is the objective after sweep u
    (trace[0] is the starting value); the sequence is non-decreasing.
    """
    theta = np.array(model._theta_array(theta0), copy=True)
    nn = theta.size
    trace = [eval_f7(theta, data)]
    if nn == 0:
        return theta, trace
    alpha = _alpha_of(theta)
    zth = data.zcal @ theta
    for _ in range(max_sweeps):
        for i in range(nn):
            mu = data.omega[i] - zth[i] + data.zcal[i, i] * theta[i]
            if mu == 0:
                continue
            new = alpha * np.exp(1j * np.angle(mu))
            delta = new - theta[i]
            if delta != 0:
                zth += data.zcal[:, i] * delta
                theta[i] = new
        trace.append(eval_f7(theta, data))
        if abs(trace[-1] - trace[-2]) <= eps2:
            break
    return theta, trace


def qcr_relax(theta0, data: CmcQpData, tol: float = 1e-10, max_iter: int = 5000):
    """Projected gradient ascent on the disc relaxation |theta_i| <= alpha.

    The step 1 / (2 lambda_max(Zcal)) guarantees per-iteration ascent; each
    iterate is clipped coordinate-wise back into the discs. Returns
    (theta_relaxed, objective_trace).
    """
    theta = np.array(model._theta_array(theta0), copy=True)
    if theta.size == 0:
        return theta, [0.0]
    alpha = _alpha_of(theta)
    lam_max = float(np.linalg.eigvalsh(data.zcal).max()) if theta.size else 0.0
    scale = float(np.abs(data.omega).max(initial=0.0)) + abs(lam_max)
    if lam_max <= 1e-14 * max(scale, 1.0):
        # Purely linear objective: boundary point in the direction of omega.
        out = theta.copy()
        nz = data.omega != 0
        out[nz] = alpha * np.exp(1j * np.angle(data.omega[nz]))
        return out, [eval_f7(theta, data), eval_f7(out, data)]
    step = 1.0 / (2.0 * lam_max)
    trace = [eval_f7(theta, data)]
    for _ in range(max_iter):
        grad = data.omega - data.zcal @ theta
        theta = theta + step * grad
        mags = np.abs(theta)
        over = mags > alpha
        theta[over] *= alpha / mags[over]
        trace.append(eval_f7(theta, data))
        if abs(trace[-1] - trace[-2]) <= tol * max(1.0, abs(trace[-1])):
            break
    return theta, trace


def qcr_solve(theta0, data: CmcQpData, tol: float = 1e-10, max_iter: int = 5000):
    """Disc relaxation followed by projection onto the modulus circle.

    Returns (theta, theta_relaxed, trace). The relaxed point can sit inside
    the discs, so both it and the circle projection are reported; downstream
    rate evaluation uses the feasible (projected) vector.
    """
    theta0 = model._theta_array(theta0)
    relaxed, trace = qcr_relax(theta0, data, tol=tol, max_iter=max_iter)
    if relaxed.size == 0:
        return relaxed.copy(), relaxed, trace
    alpha = _alpha_of(theta0)
    projected = np.where(
        relaxed != 0,
        alpha * np.exp(1j * np.angle(relaxed)),
        theta0,
    )
    return projected, relaxed, trace


def _psd_project(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(_hermitize(m))
    vals = np.maximum(vals, 0.0)
    return (vecs * vals) @ vecs.conj().T


def _admm_sdp(c: np.ndarray, diag_value: float, tol: float = 1e-6, max_iter: int = 4000):
    """max Tr(c X) s.t. X_ii = diag_value, X >= 0, by ADMM splitting.

    The X-update solves the diag-constrained quadratic in closed form; the
    dual block is the PSD projection. Residuals are scale-normalized.
    """
    n = c.shape[0]
    scale = float(np.abs(c).max(initial=0.0))
    cs = c / scale if scale > 0 else c
    x = diag_value * np.eye(n, dtype=complex)
    zmat = x.copy()
    u = np.zeros_like(x)
    idx = np.arange(n)
    converged = False
    for _ in range(max_iter):
        x = zmat - u + cs
        x = _hermitize(x)
        x[idx, idx] = diag_value
        z_prev = zmat
        zmat = _psd_project(x + u)
        u = u + x - zmat
        norm = max(np.linalg.norm(x), np.linalg.norm(zmat), 1.0)
        primal = np.linalg.norm(x - zmat)
        dual = np.linalg.norm(zmat - z_prev)
        if primal <= tol * norm and dual <= tol * norm:
            converged = True
            break
    return zmat, converged


def sdr_solve(
    data: CmcQpData,
    alpha: float,
    n_randomizations: int = 200,
    rng: np.random.Generator = None,
    admm_tol: float = 1e-6,
    admm_max_iter: int = 4000,
):
    """Semidefinite relaxation of the homogenized problem plus rounding.

    Lifts theta_hat = [theta; alpha] and maximizes theta_hat^H Zbar theta_hat
    with Zbar = [[-Zcal, omega], [omega^H, 0]]. Shifting by the smallest
    eigenvalue, Zhat = Zbar - lambda_min(Zbar) I, makes the form PSD without
    changing the maximizer on the constant-norm feasible set. The
    diagonally-constrained SDP is solved with ADMM and rounded by Gaussian
    randomization (the leading eigenvector is always in the candidate pool).
    Returns (theta, sdp_value, converged).
    """
    if rng is None:
        rng = np.random.default_rng()
    nn = data.omega.size
    if nn == 0:
        return np.zeros(0, complex), 0.0, True
    nbar = nn + 1
    zbar = np.zeros((nbar, nbar), complex)
    zbar[:nn, :nn] = -data.zcal
    zbar[:nn, nn] = data.omega
    zbar[nn, :nn] = data.omega.conj()
    lam_min = float(np.linalg.eigvalsh(zbar).min())
    zhat = _hermitize(zbar - lam_min * np.eye(nbar))

    v, converged = _admm_sdp(zhat, alpha**2, tol=admm_tol, max_iter=admm_max_iter)
    sdp_value = float(np.real(np.trace(zhat @ v)))

    vals, vecs = np.linalg.eigh(_hermitize(v))
    vals = np.maximum(vals, 0.0)
    factor = vecs * np.sqrt(vals)

    # Leading eigenvector (scaled to the trace budget) seeds the pool so the
    # rounding quality does not hinge on randomization alone.
    lead = vecs[:, -1] * np.sqrt(max(vals[-1], 0.0) * nbar)
    candidates = [lead]
    for _ in range(max(0, n_randomizations)):
        zeta = (rng.standard_normal(nbar) + 1j * rng.standard_normal(nbar)) / np.sqrt(2)
        candidates.append(factor @ zeta)

    best, best_score = None, -np.inf
    for cand in candidates:
        score = float(np.real(cand.conj() @ zhat @ cand))
        if score > best_score:
            best, best_score = cand, score
    ref = best[nn]
    if ref != 0:
        phases = np.angle(best[:nn] / ref)
    else:
        phases = np.angle(best[:nn])
    theta = alpha * np.exp(1j * phases)
    return theta, sdp_value, converged


def discrete_sweep(theta0, data: CmcQpData, levels: int, max_sweeps: int = 200):
    """Per-coordinate exhaustive search over the discrete phase set.

    Each visit evaluates all ``levels`` grid phases of cos(eta_i - phi) and
    keeps the best, breaking exact ties toward the lower grid index. Sweeps
    repeat until no coordinate changes. Returns (theta, sweeps_used).
    """
    if levels < 2:
        raise ValueError("discrete phase set needs at least 2 levels")
    theta = np.array(model._theta_array(theta0), copy=True)
    nn = theta.size
    if nn == 0:
        return theta, 0
    alpha = _alpha_of(theta)
    grid = alpha * np.exp(2j * np.pi * np.arange(levels) / levels)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        changed = False
        zth = data.zcal @ theta
        for i in range(nn):
            mu = data.omega[i] - zth[i] + data.zcal[i, i] * theta[i]
            scores = np.real(grid.conj() * mu)
            best = np.flatnonzero(scores >= scores.max() - 1e-12 * max(1.0, abs(scores.max())))[0]
            new = grid[best]
            if new != theta[i]:
                zth += data.zcal[:, i] * (new - theta[i])
                theta[i] = new
                changed = True
        if not changed:
            break
    return theta, sweeps
