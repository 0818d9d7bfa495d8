"""LS channel estimation with LoS-sensing-driven tap denoising.

Processing for one frame:

1. per-subcarrier LS estimate and its time-domain CIR,
2. kurtosis of the CIR tap magnitudes, compared against ``zeta`` to decide
   LoS vs NLoS,
3. noise-variance estimate from the taps past the cyclic prefix and the
   CFAR threshold built from it,
4. for a sensed LoS frame, the CFAR threshold rescaled by the threshold
   factor and the LoS path factor,
5. taps below the branch threshold are zeroed.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import Scenario
from .dsp import as_complex_vector

__all__ = [
    "SensingConfig",
    "EstimationResult",
    "DegenerateKurtosisError",
    "ls_estimate",
    "cir_from_fd",
    "kurtosis",
    "sense_los",
    "estimate_noise_var",
    "cfar_threshold",
    "threshold_factor",
    "delta_noise",
    "delta_los",
    "los_aided_threshold",
    "denoise",
    "los_ence",
]


class DegenerateKurtosisError(ValueError):
    """Raised when tap magnitudes have zero spread."""


@dataclass(frozen=True)
class SensingConfig:
    N: int = 512
    L_cp: int = 64
    zeta: float = 50.0
    P_f: float = 1e-3
    L: int = 4

    def __post_init__(self):
        if not self.zeta > 0:
            raise ValueError(f"zeta must be positive, got {self.zeta}")
        if not 0.0 < self.P_f < 1.0:
            raise ValueError(f"P_f must lie in (0, 1), got {self.P_f}")
        if self.L < 2:
            raise ValueError(f"L must be >= 2, got {self.L}")
        if not 0 < self.L_cp < self.N:
            raise ValueError(f"need 0 < L_cp < N, got L_cp={self.L_cp}, N={self.N}")

    @property
    def epsilon(self):
        return threshold_factor(self.P_f, self.L)


@dataclass(frozen=True, eq=False)
class EstimationResult:
    h_ls: np.ndarray
    kurtosis: float
    sensed: Scenario
    sigma2_hat: float
    cfar_threshold: float
    los_threshold: Optional[float]
    h_enhanced: np.ndarray
    degenerate: bool = False

    @property
    def applied_threshold(self):
        return self.los_threshold if self.sensed is Scenario.LOS else self.cfar_threshold


def ls_estimate(y_fd, x_fd):
    y = as_complex_vector(y_fd, "y_fd")
    x = as_complex_vector(x_fd, "x_fd")
    if y.size != x.size:
        raise ValueError(f"length mismatch: y_fd has {y.size}, x_fd has {x.size}")
    if np.any(x == 0):
        raise ValueError("x_fd has zero entries; LS division undefined")
    return y / x


def cir_from_fd(h_tilde):
    """Time-domain CIR from a frequency response: ``(1/N) sum_k H[k] e^{+j2pi kn/N}``.

    This is the unitary inverse DFT divided by ``sqrt(N)``, so a noiseless
    LS response maps back onto the physical tap gains.
    """
    return np.fft.ifft(as_complex_vector(h_tilde, "h_tilde"))


def kurtosis(cir):
    """Fourth standardized moment of ``|cir|`` (biased, 1/N moments)."""
    a = np.abs(as_complex_vector(cir, "cir"))
    if a.size < 2:
        raise ValueError("kurtosis needs at least two taps")
    dev = a - a.mean()
    var = np.mean(dev * dev)
    # Relative guard: magnitudes equal up to rounding count as constant.
    if var <= (1e-14 * max(a.max(), 1e-300)) ** 2:
        raise DegenerateKurtosisError("tap magnitudes have zero standard deviation")
    return float(np.mean(dev**4) / var**2)


def sense_los(kappa, zeta):
    return Scenario.LOS if kappa > zeta else Scenario.NLOS


def estimate_noise_var(cir, L_cp):
    """Per-real-component noise variance from the taps at index ``L_cp`` and beyond."""
    cir = as_complex_vector(cir, "cir")
    if cir.size <= L_cp:
        raise ValueError(f"need N > L_cp, got N={cir.size}, L_cp={L_cp}")
    tail = cir[L_cp:]
    return float(np.mean(tail.real**2 + tail.imag**2) / 2.0)


def cfar_threshold(sigma2_hat, P_f):
    """Rayleigh CFAR level ``sqrt(-2 sigma2 ln P_f)``; exceeded by noise taps with probability ``P_f``."""
    if not 0.0 < P_f < 1.0:
        raise ValueError(f"P_f must lie in (0, 1), got {P_f}")
    if sigma2_hat < 0:
        raise ValueError(f"sigma2_hat must be non-negative, got {sigma2_hat}")
    return math.sqrt(-2.0 * sigma2_hat * math.log(P_f))


def threshold_factor(P_f, L):
    """``P_f ** (-1 / (L**2 - 1)) - 1`` for a reference window of ``L**2 - 1`` cells."""
    if not 0.0 < P_f < 1.0:
        raise ValueError(f"P_f must lie in (0, 1), got {P_f}")
    if L < 2:
        raise ValueError(f"L must be >= 2, got {L}")
    return P_f ** (-1.0 / (L * L - 1)) - 1.0


def delta_noise(cir, L_cp):
    """Share of total tap magnitude that falls at index ``L_cp`` or later."""
    a = np.abs(as_complex_vector(cir, "cir"))
    if a.size <= L_cp:
        raise ValueError(f"need N > L_cp, got N={a.size}, L_cp={L_cp}")
    total = a.sum()
    if total <= 0:
        raise ValueError("delta_noise is undefined for an all-zero CIR")
    return float(a[L_cp:].sum() / total)


def delta_los(cir, L_cp):
    """LoS path factor.

    The LoS magnitude is taken as the strongest tap among the first
    ``L_cp // 2`` and normalized by the magnitude sum over that same window;
    the squared noise factor is added on top.
    """
    a = np.abs(as_complex_vector(cir, "cir"))
    if a.size <= L_cp:
        raise ValueError(f"need N > L_cp, got N={a.size}, L_cp={L_cp}")
    window = a[: L_cp // 2]
    denom = window.sum()
    if denom <= 0:
        raise ValueError("delta_los is undefined when the first L_cp/2 taps are all zero")
    return float(window.max() / denom + delta_noise(cir, L_cp) ** 2)


def los_aided_threshold(t_cfar, epsilon, d_los):
    if t_cfar < 0 or epsilon < 0 or d_los < 0:
        raise ValueError("t_cfar, epsilon and d_los must be non-negative")
    return epsilon * t_cfar * (1.0 + d_los)


def denoise(cir, threshold):
    """Zero every tap whose magnitude is strictly below ``threshold``."""
    if threshold < 0:
        raise ValueError(f"threshold must be non-negative, got {threshold}")
    cir = np.asarray(cir, dtype=np.complex128)
    return np.where(np.abs(cir) >= threshold, cir, 0.0 + 0.0j)


def los_ence(x_fd, y_fd, cfg):
    """Run the full LoS-sensing enhanced estimator on one received frame.

    A frame whose tap magnitudes are all equal has no defined kurtosis; it is
    handled as NLoS and flagged through ``EstimationResult.degenerate``.
    """
    h_ls = cir_from_fd(ls_estimate(y_fd, x_fd))
    if h_ls.size != cfg.N:
        raise ValueError(f"frame length {h_ls.size} does not match N={cfg.N}")

    degenerate = False
    try:
        kappa = kurtosis(h_ls)
        sensed = sense_los(kappa, cfg.zeta)
    except DegenerateKurtosisError:
        kappa, sensed, degenerate = float("nan"), Scenario.NLOS, True

    sigma2_hat = estimate_noise_var(h_ls, cfg.L_cp)
    t_cfar = cfar_threshold(sigma2_hat, cfg.P_f)

    t_los = None
    if sensed is Scenario.LOS:
        t_los = los_aided_threshold(t_cfar, cfg.epsilon, delta_los(h_ls, cfg.L_cp))
        h_en = denoise(h_ls, t_los)
    else:
        h_en = denoise(h_ls, t_cfar)

    return EstimationResult(
        h_ls=h_ls,
        kurtosis=kappa,
        sensed=sensed,
        sigma2_hat=sigma2_hat,
        cfar_threshold=t_cfar,
        los_threshold=t_los,
        h_enhanced=h_en,
        degenerate=degenerate,
    )
