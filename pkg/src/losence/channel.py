"""Sparse Rician tapped-delay-line channel for single-frame OFDM links.

A realization combines a deterministic LoS component on delay 0 with diffuse
Rayleigh taps spread over the tap line::

    h = g * sqrt(k / (k + 1)) * c_los + g * sqrt(1 / (k + 1)) * c_diffuse

All sampling takes an explicit ``numpy.random.Generator``.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dsp import as_complex_vector

__all__ = [
    "Scenario",
    "ChannelConfig",
    "ChannelRealization",
    "sample_scenario",
    "sample_channel",
    "to_padded_cir",
    "apply_channel",
    "add_awgn",
]


class Scenario(str, enum.Enum):
    LOS = "LoS"
    NLOS = "NLoS"


@dataclass(frozen=True)
class ChannelConfig:
    N: int = 512
    L_cp: int = 64
    tap_line_length: int = 20
    P: int = 10
    r: float = 0.8
    k_range: tuple = (3.0, 13.0)
    g_range: tuple = (0.1, 1.0)
    # Literal CN(0, I_P) diffuse taps instead of per-tap variance 1/P.
    nlos_unit_variance: bool = False

    def __post_init__(self):
        if not 1 <= self.P <= self.tap_line_length:
            raise ValueError(
                f"P must satisfy 1 <= P <= tap_line_length={self.tap_line_length}, got {self.P}"
            )
        if not self.tap_line_length <= self.L_cp < self.N:
            raise ValueError(
                "need tap_line_length <= L_cp < N, got "
                f"tap_line_length={self.tap_line_length}, L_cp={self.L_cp}, N={self.N}"
            )
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"r must lie in [0, 1], got {self.r}")
        k_min, k_max = self.k_range
        if not 0.0 <= k_min <= k_max:
            raise ValueError(f"k_range must satisfy 0 <= k_min <= k_max, got {self.k_range}")
        g_min, g_max = self.g_range
        if not 0.0 < g_min <= g_max:
            raise ValueError(f"g_range must satisfy 0 < g_min <= g_max, got {self.g_range}")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One sparse CIR draw.

    ``delays`` are sorted; ``los_gains`` and ``nlos_gains`` are the two
    components of the tap gains aligned with them.
    """

    delays: np.ndarray
    los_gains: np.ndarray
    nlos_gains: np.ndarray
    scenario: Scenario
    rician_k: float
    large_scale_g: float

    @property
    def gains(self):
        return self.los_gains + self.nlos_gains

    @property
    def num_paths(self):
        return int(self.delays.size)

    @property
    def taps(self):
        return [(int(d), complex(c)) for d, c in zip(self.delays, self.gains)]

    @property
    def max_delay(self):
        return int(self.delays.max())


def sample_scenario(rng, r):
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"LoS probability r must lie in [0, 1], got {r}")
    return Scenario.LOS if rng.random() < r else Scenario.NLOS


def sample_channel(rng, cfg, scenario):
    """Draw a realization for ``scenario``.

    Draw order (fixed for reproducibility): g, k (LoS only), extra delays,
    LoS phase (LoS only), diffuse taps.
    """
    if cfg.P > cfg.tap_line_length:
        raise ValueError(f"P={cfg.P} exceeds tap_line_length={cfg.tap_line_length}")
    scenario = Scenario(scenario)
    g = float(rng.uniform(*cfg.g_range))
    k = float(rng.uniform(*cfg.k_range)) if scenario is Scenario.LOS else 0.0

    extra = rng.choice(np.arange(1, cfg.tap_line_length), size=cfg.P - 1, replace=False)
    delays = np.concatenate([[0], np.sort(extra)]).astype(np.intp)

    los = np.zeros(cfg.P, dtype=np.complex128)
    if scenario is Scenario.LOS:
        theta = rng.uniform(0.0, 2.0 * np.pi)
        los[0] = g * math.sqrt(k / (k + 1.0)) * np.exp(1j * theta)

    tap_var = 1.0 if cfg.nlos_unit_variance else 1.0 / cfg.P
    diffuse = rng.standard_normal(cfg.P) + 1j * rng.standard_normal(cfg.P)
    nlos = g * math.sqrt(1.0 / (k + 1.0)) * math.sqrt(tap_var / 2.0) * diffuse

    return ChannelRealization(
        delays=delays, los_gains=los, nlos_gains=nlos, scenario=scenario, rician_k=k, large_scale_g=g
    )


def to_padded_cir(ch, N):
    if ch.max_delay >= N:
        raise ValueError(f"max delay {ch.max_delay} does not fit in {N} taps")
    h = np.zeros(N, dtype=np.complex128)
    h[ch.delays] = ch.gains
    return h


def apply_channel(ch, s, N, L_cp):
    """Linear convolution of the CP-extended frame ``s`` with the CIR.

    The output keeps the first ``N + L_cp`` samples; the tail that would spill
    into the next frame is dropped.
    """
    s = as_complex_vector(s, "s")
    if s.size != N + L_cp:
        raise ValueError(f"expected a CP-extended frame of {N + L_cp} samples, got {s.size}")
    if ch.max_delay > L_cp:
        raise ValueError(f"max delay {ch.max_delay} exceeds the cyclic prefix L_cp={L_cp}")
    h = np.zeros(ch.max_delay + 1, dtype=np.complex128)
    h[ch.delays] = ch.gains
    return np.convolve(s, h)[: s.size]


def add_awgn(x, snr_db, signal_power, rng):
    """Add circular complex Gaussian noise; returns ``(noisy, noise_var)``.

    ``noise_var`` is the total complex variance per sample. ``snr_db=inf``
    leaves ``x`` untouched and reports zero variance.
    """
    if signal_power <= 0:
        raise ValueError(f"signal_power must be positive, got {signal_power}")
    x = np.asarray(x, dtype=np.complex128)
    if math.isinf(snr_db) and snr_db > 0:
        return x.copy(), 0.0
    noise_var = signal_power / 10.0 ** (snr_db / 10.0)
    noise = rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size)
    return x + math.sqrt(noise_var / 2.0) * noise, noise_var
