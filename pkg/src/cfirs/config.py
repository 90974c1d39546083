"""Scenario configuration for the cell-free multi-IRS downlink."""

from __future__ import annotations

from dataclasses import dataclass, field, replace


def db2lin(x_db: float) -> float:
    """Convert a dB power ratio to linear scale."""
    return 10.0 ** (x_db / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """All scenario dimensions, powers, and solver tolerances.

    Dimensions: ``l`` base stations with ``m_b`` antennas each, ``k`` user
    equipments with ``m_u`` antennas each, ``r`` reflecting surfaces with
    ``n = n_h * n_v`` elements each.  ``r = 0`` encodes the IRS-free baseline.

    Physical defaults follow the usual link-budget conventions: ``c0`` is the
    linear power gain at 1 m, ``sigma2`` the noise power in watts, ``beta_g``
    / ``beta_s`` the linear Rician factors of the reflector-related channels,
    ``alpha`` the reflecting efficiency (modulus of every reflection
    coefficient), and ``discrete_levels`` the size of the discrete phase set
    (0 means continuous phases).
    """

    l: int
    k: int
    r: int
    m_b: int
    m_u: int
    n: int
    n_h: int
    n_v: int
    alpha: float = 1.0
    p_max: tuple = (0.1,)
    sigma2: float = 1e-11
    beta_g: float = db2lin(3.0)
    beta_s: float = db2lin(3.0)
    c0: float = 1e-3
    pathloss_direct: float = 3.75
    pathloss_irs: float = 2.2
    discrete_levels: int = 0
    eps1: float = 1e-5
    eps2: float = 1e-8
    eps3: float = 1e-4
    tau: tuple = None
    max_outer: int = 50
    max_dual: int = 500
    max_aso: int = 200

    def __post_init__(self):
        if min(self.l, self.k, self.m_b, self.m_u) < 1:
            raise ValueError("l, k, m_b, m_u must all be >= 1")
        if self.r < 0:
            raise ValueError("r must be >= 0")
        if self.r > 0 and (self.n < 1 or self.n_h < 1 or self.n_v < 1):
            raise ValueError("n, n_h, n_v must be >= 1 when r > 0")
        if self.n != self.n_h * self.n_v:
            raise ValueError(f"n = {self.n} must equal n_h * n_v = {self.n_h * self.n_v}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.sigma2 <= 0.0:
            raise ValueError("sigma2 must be positive")
        if self.discrete_levels < 0:
            raise ValueError("discrete_levels must be >= 0")
        p = self.p_max
        if isinstance(p, (int, float)):
            p = (float(p),) * self.l
        else:
            p = tuple(float(v) for v in p)
            if len(p) == 1:
                p = p * self.l
        if len(p) != self.l:
            raise ValueError(f"p_max needs {self.l} entries, got {len(p)}")
        if min(p) <= 0.0:
            raise ValueError("p_max entries must be positive")
        object.__setattr__(self, "p_max", p)
        t = self.tau
        if t is None:
            t = tuple(1.0 / v for v in p)
        else:
            t = tuple(float(v) for v in t)
            if len(t) == 1:
                t = t * self.l
            if len(t) != self.l or min(t) <= 0.0:
                raise ValueError("tau needs l positive entries")
        object.__setattr__(self, "tau", t)

    @property
    def n_irs_total(self) -> int:
        """Total number of reflection coefficients across all surfaces."""
        return self.r * self.n

    def with_(self, **changes) -> "SystemConfig":
        """Return a copy with the given fields replaced (re-validated)."""
        return replace(self, **changes)


def desk_config(**overrides) -> SystemConfig:
    """A small default scenario usable on a desk machine.

    Keeps the physical constants of the full-scale setup (powers, noise,
    path-loss exponents, Rician factors) but shrinks the network to a size
    where a full Monte-Carlo sweep runs in minutes.
    """
    base = dict(
        l=3, k=2, r=2, m_b=4, m_u=2, n=16, n_h=4, n_v=4,
        p_max=(0.1,), sigma2=1e-11, c0=1e-3,
    )
    base.update(overrides)
    return SystemConfig(**base)
