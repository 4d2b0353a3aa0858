"""System configuration, geometry and seeded Rician channel synthesis."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError

Point = tuple[float, float]

D0 = 1.0  # pathloss reference distance, meters


def dbm_to_watts(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def watts_to_dbm(x_w: float) -> float:
    return 10.0 * math.log10(x_w) + 30.0


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """All scalars of one simulated system plus solver knobs.

    Powers are in watts, ``gamma_bar`` is a linear SINR ratio. The defaults
    are the reference simulation setup (20 dB SINR target, 1 mW per element,
    40 dBm budget, -110 dBm noise); at N1=50 they are not feasible under the
    Frobenius harvest model, see :func:`feasible_defaults`.
    """

    M: int = 4
    K: int = 4
    N1: int = 50
    N2: int = 50
    eta: float = 0.8
    mu: float = 1e-3
    gamma_bar: float = 100.0
    p_max: float = 10.0
    sigma2: float = 1e-14
    tau: float = 10.0
    kappa: float = 5.0
    rho0: float = 1e-3
    alpha_bs_ris1: float = 3.6
    alpha_ris1_ris2: float = 2.2
    alpha_bs_ris2: float = 2.2
    alpha_ris1_user: float = 2.2
    alpha_ris2_user: float = 2.2
    bs_pos: Point = (0.0, 0.0)
    ris1_pos: Point = (2.0, 2.0)
    ris2_pos: Point = (4.0, 2.0)
    user_center: Point = (6.0, 0.0)
    user_radius: float = 2.0
    seed: int = 0
    eps: Optional[float] = None  # BCD stop threshold, None -> 1e-4 * p_max
    i_max: int = 20
    solver_tol: float = 1e-7
    sdp_tol: float = 1e-6
    sca_max_iters: int = 30
    sca_rel_tol: float = 1e-4
    penalty_max_iters: int = 20
    penalty_rel_tol: float = 1e-5  # penalty stop at penalty_rel_tol * (N + 1)
    phase_sweeps: int = 5
    phase_sweep_tol: float = 1e-4
    phase_slack: bool = True

    def __post_init__(self):
        for name in ("bs_pos", "ris1_pos", "ris2_pos", "user_center"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.M < 1 or self.K < 1:
            raise DomainError("M and K must be >= 1")
        if self.N1 < 0 or self.N2 < 0 or self.N1 + self.N2 < 1:
            raise DomainError("need N1, N2 >= 0 and N1 + N2 >= 1")
        if not 0.0 < self.eta <= 1.0:
            raise DomainError("eta must lie in (0, 1]")
        if self.mu < 0:
            raise DomainError("mu must be >= 0")
        for name in ("p_max", "sigma2", "gamma_bar", "tau"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0")
        if self.i_max < 0:
            raise DomainError("i_max must be >= 0")

    @property
    def epsilon(self) -> float:
        return 1e-4 * self.p_max if self.eps is None else self.eps

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Short hash over the canonical JSON serialization of every field."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


FEASIBLE_MU = 1e-4


def feasible_defaults(**changes) -> SystemConfig:
    """Reference defaults with mu lowered to 0.1 mW so RIS1 can power itself at N1=50."""
    return SystemConfig(mu=FEASIBLE_MU).replace(**changes)


# -- config files ---------------------------------------------------------

_POWER_FIELDS = {"mu", "p_max", "sigma2"}
_UNIT = re.compile(r"^\s*([-+0-9.eE]+)\s*([a-zA-Z]*)\s*$")


def _parse_power(text: str) -> float:
    m = _UNIT.match(text)
    if not m:
        raise ValueError(f"bad power value {text!r}")
    value, unit = float(m.group(1)), m.group(2).lower()
    if unit == "dbm":
        return dbm_to_watts(value)
    scale = {"w": 1.0, "mw": 1e-3, "uw": 1e-6}.get(unit)
    if scale is None:
        raise ValueError(f"power {text!r} needs a unit suffix: W, mW, uW or dBm")
    return value * scale


def _parse_ratio(text: str) -> float:
    m = _UNIT.match(text)
    if not m:
        raise ValueError(f"bad ratio {text!r}")
    value, unit = float(m.group(1)), m.group(2).lower()
    if unit == "db":
        return db_to_linear(value)
    if unit == "":
        return value
    raise ValueError(f"ratio {text!r}: unit must be dB or none")


def parse_config(text: str, base: Optional[SystemConfig] = None) -> SystemConfig:
    """Parse ``key = value`` lines into a config.

    Blank lines and ``#`` comments are ignored. Keys are the field names of
    :class:`SystemConfig`. ``mu``, ``p_max`` and ``sigma2`` need a unit
    (``W``, ``mW``, ``uW`` or ``dBm``); ``gamma_bar`` takes ``dB`` or a bare
    linear ratio; positions are written ``x, y``.
    """
    base = base or SystemConfig()
    types = {f.name: f.type for f in dataclasses.fields(SystemConfig)}
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in _POWER_FIELDS:
            changes[key] = _parse_power(value)
        elif key == "gamma_bar":
            changes[key] = _parse_ratio(value)
        elif key.endswith("_pos") or key == "user_center":
            changes[key] = tuple(float(v) for v in value.split(","))
        elif key == "eps":
            changes[key] = None if value.lower() == "none" else float(value)
        elif key == "phase_slack":
            changes[key] = value.lower() in ("1", "true", "yes", "on")
        elif types[key] in ("int", int):
            changes[key] = int(value)
        else:
            changes[key] = float(value)
    return base.replace(**changes)


def load_config(path, base: Optional[SystemConfig] = None) -> SystemConfig:
    return parse_config(Path(path).read_text(), base)


# -- geometry and channels -------------------------------------------------

def make_rng(seed: int, *key: int) -> np.random.Generator:
    """PCG64 stream for ``seed`` and a spawn key, e.g. (realization, stream)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def pathloss(d: float, alpha: float, rho0: float = 1e-3) -> float:
    if not d > 0:
        raise DomainError(f"distance must be positive, got {d}")
    return rho0 * (d / D0) ** (-alpha)


def steering(n: int, angle: float) -> np.ndarray:
    """Half-wavelength ULA response exp(j*pi*i*sin(angle)), i = 0..n-1."""
    return np.exp(1j * np.pi * np.arange(n) * np.sin(angle))


def los_component(tx_pos, rx_pos, rows: int, cols: int) -> np.ndarray:
    """Rank-one LoS matrix ``a_rx a_tx^H``; rows index the array at ``rx_pos``."""
    dx, dy = rx_pos[0] - tx_pos[0], rx_pos[1] - tx_pos[1]
    if dx == 0 and dy == 0:
        raise DomainError("LoS needs distinct positions")
    aod = math.atan2(dy, dx)
    aoa = math.atan2(-dy, -dx)
    return np.outer(steering(rows, aoa), steering(cols, aod).conj())


def draw_channel(rng, tx_pos, rx_pos, rows, cols, alpha, kappa, rho0=1e-3, nlos=None):
    """One Rician block scaled by pathloss.

    ``nlos`` replaces the Gaussian draw when given (the generator is then
    left untouched).
    """
    pl = pathloss(distance(tx_pos, rx_pos), alpha, rho0)
    los = los_component(tx_pos, rx_pos, rows, cols)
    if nlos is None:
        nlos = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / math.sqrt(2.0)
    return math.sqrt(pl) * (math.sqrt(kappa / (kappa + 1.0)) * los + math.sqrt(1.0 / (kappa + 1.0)) * nlos)


@dataclass(frozen=True)
class ChannelSet:
    """Channel blocks of one realization.

    ``h1[k]`` / ``h2[k]`` are the RIS-to-user vectors of user k. Rows of H1
    and H2 index BS antennas.
    """

    H1: np.ndarray  # (M, N1)
    H2: np.ndarray  # (M, N2)
    D: np.ndarray  # (N1, N2)
    h1: np.ndarray  # (K, N1)
    h2: np.ndarray  # (K, N2)
    user_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    @property
    def M(self) -> int:
        return self.H1.shape[0]

    @property
    def K(self) -> int:
        return self.h1.shape[0]

    @property
    def N1(self) -> int:
        return self.H1.shape[1]

    @property
    def N2(self) -> int:
        return self.H2.shape[1]

    def swapped(self) -> "ChannelSet":
        """Relabel RIS1 <-> RIS2 (the cascade then runs BS -> RIS2 -> RIS1)."""
        return ChannelSet(self.H2, self.H1, self.D.T.copy(), self.h2, self.h1, self.user_positions)


def sample_disk(rng, center, radius, count) -> np.ndarray:
    u = rng.random((count, 2))
    r = radius * np.sqrt(u[:, 0])
    phi = 2.0 * np.pi * u[:, 1]
    return np.column_stack((center[0] + r * np.cos(phi), center[1] + r * np.sin(phi)))


def synthesize_scenario(config: SystemConfig, realization: int = 0) -> ChannelSet:
    """Draw user positions and all channel blocks for one realization.

    Stream order: user positions, H1, H2, D, h1 (ascending k), h2 (ascending k).
    """
    c = config
    rng = make_rng(c.seed, realization, 0)
    users = sample_disk(rng, c.user_center, c.user_radius, c.K)

    def block(tx, rx, rows, cols, alpha):
        return draw_channel(rng, tx, rx, rows, cols, alpha, c.kappa, c.rho0)

    H1 = block(c.ris1_pos, c.bs_pos, c.M, c.N1, c.alpha_bs_ris1)
    H2 = block(c.ris2_pos, c.bs_pos, c.M, c.N2, c.alpha_bs_ris2)
    D = block(c.ris2_pos, c.ris1_pos, c.N1, c.N2, c.alpha_ris1_ris2)
    h1 = np.array([block(u, c.ris1_pos, c.N1, 1, c.alpha_ris1_user)[:, 0] for u in users]).reshape(c.K, c.N1)
    h2 = np.array([block(u, c.ris2_pos, c.N2, 1, c.alpha_ris2_user)[:, 0] for u in users]).reshape(c.K, c.N2)
    return ChannelSet(H1, H2, D, h1, h2, users)


def random_phases(rng, n: int) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random(n))
