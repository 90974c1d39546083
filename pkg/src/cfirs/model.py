"""Domain types, channel stacking, and exact SINR / sum-rate evaluation.

All base stations jointly serve every user through a central processor, so
per-user signal and interference combine coherently across base stations.
With the stacked effective channel Hs_k (L*m_b x m_u) and stacked precoders
Ws_i (L*m_b x m_u), the per-user link matrices are B[k, i] = Hs_k^H Ws_i and

    V_k    = sum_{i != k} B[k,i] B[k,i]^H + sigma2 * I     (interference+noise)
    Vbar_k = V_k + B[k,k] B[k,k]^H                          (full covariance)

The SINR matrix is kept in the Hermitian PSD orientation
Gamma_k = B[k,k]^H V_k^{-1} B[k,k]; log det(I + Gamma_k) is unchanged by the
orientation and the Hermitian form keeps every downstream quadratic form PSD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet
from .config import SystemConfig


@dataclass
class BeamformerSet:
    """Active transmit beamformers, one (m_b x m_u) matrix per (BS, UE) pair."""

    w: np.ndarray  # (L, K, m_b, m_u)

    def per_bs_power(self) -> np.ndarray:
        """Transmit power of each base station, sum_k ||W_{l,k}||_F^2."""
        return np.sum(np.abs(self.w) ** 2, axis=(1, 2, 3))

    def validate(self, p_max, tol: float = 1e-6) -> None:
        power = self.per_bs_power()
        limit = np.asarray(p_max, float)
        if (power > limit + tol).any():
            raise ValueError(f"per-BS power {power} exceeds budget {limit}")


@dataclass
class PhaseVector:
    """Concatenated reflection coefficients, IRS-major, all of modulus alpha."""

    theta: np.ndarray  # (R*N,)
    alpha: float = 1.0

    def validate(self, discrete_levels: int = 0, tol: float = 1e-12) -> None:
        mags = np.abs(self.theta)
        if mags.size and np.max(np.abs(mags - self.alpha)) > tol:
            raise ValueError("reflection coefficients must have modulus alpha")
        if discrete_levels > 0 and self.theta.size:
            phases = np.angle(self.theta / self.alpha) % (2 * np.pi)
            grid = 2 * np.pi / discrete_levels
            offset = phases / grid
            dist = np.abs(offset - np.round(offset)) * grid
            if np.max(dist) > tol:
                raise ValueError("phases must lie on the discrete grid")


@dataclass(frozen=True)
class StackedChannels:
    """Block-stacked channel matrices (index 1 of each family first).

    d_k[k] : (L*m_b, m_u)   direct channels stacked over BSs
    g_k[k] : (R*N, m_u)     IRS->UE channels stacked over IRSs
    s      : (R*N, L*m_b)   block (r, l) holds the BS l -> IRS r channel
    """

    d_k: np.ndarray
    g_k: np.ndarray
    s: np.ndarray


def _w_array(w) -> np.ndarray:
    return w.w if isinstance(w, BeamformerSet) else np.asarray(w)


def _theta_array(theta) -> np.ndarray:
    if theta is None:
        return None
    return theta.theta if isinstance(theta, PhaseVector) else np.asarray(theta)


def stack(channels: ChannelSet) -> StackedChannels:
    """Aggregate per-link channels into the stacked matrices used by the
    passive-beamforming subproblem.

    The block layout of ``s`` is pinned by the requirement that the stacked
    effective channel reproduces the per-link one blockwise:
    s[r*N:(r+1)*N, l*m_b:(l+1)*m_b] = bs_irs[l, r].
    """
    L, K, Mb, Mu = channels.direct.shape
    R = channels.irs_ue.shape[0]
    N = channels.irs_ue.shape[2] if R else 0
    d_k = channels.direct.transpose(1, 0, 2, 3).reshape(K, L * Mb, Mu)
    g_k = channels.irs_ue.transpose(1, 0, 2, 3).reshape(K, R * N, Mu)
    s = channels.bs_irs.transpose(1, 2, 0, 3).reshape(R * N, L * Mb)
    return StackedChannels(d_k=d_k, g_k=g_k, s=s)


def effective_channel(channels: ChannelSet, theta) -> np.ndarray:
    """Per-link effective channels H[l, k] = D[l, k] + sum_r S[l,r]^H Theta_r^H G[r,k].

    ``theta`` may be None (or empty) to drop the reflected term entirely.
    """
    theta = _theta_array(theta)
    h = channels.direct.copy()
    R = channels.irs_ue.shape[0]
    if theta is None or R == 0 or theta.size == 0:
        return h
    N = channels.irs_ue.shape[2]
    th = np.asarray(theta).reshape(R, N)
    h += np.einsum(
        "lrnm,rn,rknu->lkmu",
        channels.bs_irs.conj(), th.conj(), channels.irs_ue,
    )
    return h


def link_matrices(h: np.ndarray, w) -> np.ndarray:
    """B[k, i] = sum_l H[l,k]^H W[l,i], the coherent per-user link matrices."""
    w = _w_array(w)
    return np.einsum("lkmu,limv->kiuv", h.conj(), w)


def noise_plus_interference(b: np.ndarray, sigma2: float):
    """(V, Vbar) per user from the link matrices; both Hermitian PD."""
    K, _, Mu, _ = b.shape
    gram = np.einsum("kiuv,kiwv->kiuw", b, b.conj())  # B[k,i] B[k,i]^H
    vbar = gram.sum(axis=1) + sigma2 * np.eye(Mu)
    v = vbar - gram[np.arange(K), np.arange(K)]
    return v, vbar


def sinr(h: np.ndarray, w, sigma2: float) -> np.ndarray:
    """Per-user SINR matrices Gamma_k = B_k^H V_k^{-1} B_k (Hermitian PSD)."""
    b = link_matrices(h, w)
    v, _ = noise_plus_interference(b, sigma2)
    K = b.shape[0]
    gamma = np.empty_like(v)
    for k in range(K):
        try:
            np.linalg.cholesky(v[k])
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                f"interference covariance of user {k} is not positive definite"
            ) from exc
        bk = b[k, k]
        gk = bk.conj().T @ np.linalg.solve(v[k], bk)
        gamma[k] = 0.5 * (gk + gk.conj().T)
    return gamma


def _logdet_hermitian(a: np.ndarray) -> float:
    sign, logabs = np.linalg.slogdet(a)
    return float(logabs)


def sum_rate(channels: ChannelSet, w, theta, sigma2: float) -> float:
    """Achievable sum rate in nats, sum_k [log det Vbar_k - log det V_k].

    Evaluated through the determinant identity rather than an explicit SINR
    inverse; base-2 conversion happens only at reporting boundaries.
    """
    h = effective_channel(channels, theta)
    b = link_matrices(h, w)
    v, vbar = noise_plus_interference(b, sigma2)
    total = 0.0
    for k in range(v.shape[0]):
        total += _logdet_hermitian(vbar[k]) - _logdet_hermitian(v[k])
    return float(total)


def sum_rate_from_sinr(gamma: np.ndarray) -> float:
    """sum_k log det(I + Gamma_k); explicit-SINR path kept for cross-checks."""
    total = 0.0
    for g in gamma:
        total += _logdet_hermitian(np.eye(g.shape[0]) + g)
    return float(total)


def matched_filter_init(h: np.ndarray, p_max) -> BeamformerSet:
    """Matched-filter start: W[l,k] = c_l H[l,k], each BS at full power,
    split evenly across users."""
    L = h.shape[0]
    w = h.copy()
    for l in range(L):
        norm2 = np.sum(np.abs(h[l]) ** 2)
        if norm2 == 0.0:
            continue
        w[l] *= np.sqrt(p_max[l] / norm2)
    return BeamformerSet(w=w)
