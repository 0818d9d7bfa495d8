"""Monte Carlo engine: paired trials, NMSE aggregation and parameter sweeps.

Every method variant at a given (point, trial index) is evaluated on the same
pilot, channel and noise draw, so differences between variants are paired.
A point's mean NMSE is the summed squared error over the summed true-channel
energy of its trials.
"""

import enum
import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import dsp
from .channel import (
    ChannelConfig,
    Scenario,
    add_awgn,
    apply_channel,
    sample_channel,
    sample_scenario,
    to_padded_cir,
)
from .estimation import (
    DegenerateKurtosisError,
    SensingConfig,
    cir_from_fd,
    denoise,
    kurtosis,
    los_ence,
    ls_estimate,
)

log = logging.getLogger(__name__)

__all__ = [
    "MethodVariant",
    "SweepKind",
    "SimConfig",
    "SweepRecord",
    "Frame",
    "PointResult",
    "nmse",
    "simulate_frame",
    "variant_cir",
    "run_trial",
    "run_paired_trial",
    "run_point",
    "run_sweep",
    "sensing_accuracy",
    "trial_rng",
    "retained_taps",
    "ZetaCalibration",
    "calibrate_zeta",
    "MAX_DEGENERATE_FRACTION",
]

# Degenerate-kurtosis trials are dropped from a mean only below this share.
MAX_DEGENERATE_FRACTION = 1e-3

# Transmit power per sample: unitary IDFT of unit-power 4-QAM symbols.
SIGNAL_POWER = 1.0


class MethodVariant(str, enum.Enum):
    LS = "LS"
    PROP = "Prop"
    C_NLOS_C_LOS = "cNLoS_cLoS"
    N_NLOS_C_LOS = "nNLoS_cLoS"
    N_NLOS_L_LOS = "nNLoS_lLoS"
    C_NLOS_N_LOS = "cNLoS_nLoS"


class SweepKind(str, enum.Enum):
    SNR = "snr"
    R = "r"
    P = "p"


# Threshold applied per sensed branch: "cfar", "los" or None (no denoising).
_BRANCHES = {
    MethodVariant.LS: (None, None),
    MethodVariant.PROP: ("cfar", "los"),
    MethodVariant.C_NLOS_C_LOS: ("cfar", "cfar"),
    MethodVariant.N_NLOS_C_LOS: (None, "cfar"),
    MethodVariant.N_NLOS_L_LOS: (None, "los"),
    MethodVariant.C_NLOS_N_LOS: ("cfar", None),
}


@dataclass(frozen=True)
class SimConfig:
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    sensing: SensingConfig = field(default_factory=SensingConfig)
    snr_grid_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials_per_point: int = 10_000
    methods: tuple = tuple(MethodVariant)
    master_seed: int = 2024

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "methods", tuple(MethodVariant(m) for m in self.methods))
        if self.trials_per_point < 1:
            raise ValueError(f"trials_per_point must be >= 1, got {self.trials_per_point}")
        if not self.snr_grid_db:
            raise ValueError("snr_grid_db must be non-empty")
        if not self.methods:
            raise ValueError("methods must be non-empty")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods must not contain duplicates")
        if (self.channel.N, self.channel.L_cp) != (self.sensing.N, self.sensing.L_cp):
            raise ValueError("channel and sensing configs disagree on N / L_cp")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")

    def with_channel(self, **changes):
        return replace(self, channel=replace(self.channel, **changes))


@dataclass(frozen=True)
class SweepRecord:
    method: MethodVariant
    snr_db: float
    param_tag: str
    mean_nmse: float
    trials: int
    degenerate: int = 0


@dataclass(frozen=True, eq=False)
class Frame:
    """Everything produced by the transmitter/channel side of one trial."""

    channel: object
    h_true: np.ndarray
    x_fd: np.ndarray
    y_fd: np.ndarray
    noise_var: float


@dataclass(eq=False)
class PointResult:
    """Raw per-trial data for one (parameter point, SNR)."""

    snr_db: float
    param_tag: str
    errors: dict
    channel_energy: np.ndarray
    scenarios: np.ndarray
    sensed: np.ndarray
    degenerate: np.ndarray

    @property
    def trials(self):
        return int(self.channel_energy.size)

    def mean_nmse(self, method):
        keep = ~self.degenerate
        err = self.errors[MethodVariant(method)][keep]
        return float(math.fsum(err) / math.fsum(self.channel_energy[keep]))

    def frame_nmse(self, method):
        return self.errors[MethodVariant(method)] / self.channel_energy


def nmse(h_est, h_true):
    """Frame NMSE ``||h_est - h_true||^2 / ||h_true||^2``."""
    h_est = np.asarray(h_est, dtype=np.complex128)
    h_true = np.asarray(h_true, dtype=np.complex128)
    if h_est.shape != h_true.shape:
        raise ValueError(f"shape mismatch: {h_est.shape} vs {h_true.shape}")
    ref = float(np.vdot(h_true, h_true).real)
    if ref <= 0:
        raise ValueError("true channel has zero energy")
    diff = h_est - h_true
    return float(np.vdot(diff, diff).real) / ref


def trial_rng(master_seed, *key):
    """Generator for one trial, derived from a stable hash of the trial coordinates.

    The last element of ``key`` is the trial index; the rest identify the point.
    """
    *point, index = key
    text = "|".join([str(int(master_seed))] + [repr(k) for k in point])
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return np.random.default_rng([int.from_bytes(digest, "little"), int(index)])


def simulate_frame(cfg, snr_db, rng, scenario=None):
    """Transmit one random 4-QAM pilot frame through a random channel.

    ``scenario`` forces the propagation scenario instead of drawing it with
    probability ``cfg.channel.r``.
    """
    ch_cfg = cfg.channel
    N, L_cp = ch_cfg.N, ch_cfg.L_cp
    if scenario is None:
        scenario = sample_scenario(rng, ch_cfg.r)
    ch = sample_channel(rng, ch_cfg, scenario)

    bits = rng.integers(0, 2, size=2 * N)
    x_fd = dsp.qam4_modulate(bits)
    s = dsp.add_cyclic_prefix(dsp.idft(x_fd), L_cp)
    r = apply_channel(ch, s, N, L_cp)
    r, noise_var = add_awgn(r, snr_db, SIGNAL_POWER, rng)
    y_fd = dsp.dft(dsp.remove_cyclic_prefix(r, N, L_cp))
    return Frame(
        channel=ch, h_true=to_padded_cir(ch, N), x_fd=x_fd, y_fd=y_fd, noise_var=noise_var
    )


def variant_cir(result, variant):
    """CIR a method variant reports, given the shared estimation result."""
    nlos_rule, los_rule = _BRANCHES[MethodVariant(variant)]
    rule = los_rule if result.sensed is Scenario.LOS else nlos_rule
    if rule is None:
        return result.h_ls
    if rule == "cfar":
        return denoise(result.h_ls, result.cfar_threshold)
    return result.h_enhanced


def run_paired_trial(cfg, snr_db, rng, scenario=None):
    """One frame, all configured variants; returns ``(frame, result, {variant: sq_error})``."""
    frame = simulate_frame(cfg, snr_db, rng, scenario)
    result = los_ence(frame.x_fd, frame.y_fd, cfg.sensing)
    errors = {}
    for m in cfg.methods:
        d = variant_cir(result, m) - frame.h_true
        errors[m] = float(np.vdot(d, d).real)
    return frame, result, errors


def run_trial(cfg, snr_db, variant, rng):
    frame = simulate_frame(cfg, snr_db, rng)
    result = los_ence(frame.x_fd, frame.y_fd, cfg.sensing)
    return nmse(variant_cir(result, variant), frame.h_true)


def run_point(cfg, snr_db, point_key=("snr", None), param_tag=""):
    """Run ``cfg.trials_per_point`` paired trials at one SNR."""
    T = cfg.trials_per_point
    errors = {m: np.empty(T) for m in cfg.methods}
    energy = np.empty(T)
    scenarios = np.empty(T, dtype=bool)
    sensed = np.empty(T, dtype=bool)
    degenerate = np.empty(T, dtype=bool)
    for t in range(T):
        rng = trial_rng(cfg.master_seed, *point_key, float(snr_db), t)
        frame, result, errs = run_paired_trial(cfg, snr_db, rng)
        for m, e in errs.items():
            errors[m][t] = e
        energy[t] = float(np.vdot(frame.h_true, frame.h_true).real)
        scenarios[t] = frame.channel.scenario is Scenario.LOS
        sensed[t] = result.sensed is Scenario.LOS
        degenerate[t] = result.degenerate
    return PointResult(
        snr_db=float(snr_db),
        param_tag=param_tag,
        errors=errors,
        channel_energy=energy,
        scenarios=scenarios,
        sensed=sensed,
        degenerate=degenerate,
    )


def _point_configs(cfg, sweep, values):
    """Yield ``(point_cfg, point_key, param_tag, snr_grid)`` per sweep point."""
    sweep = SweepKind(sweep)
    if sweep is SweepKind.SNR:
        grid = tuple(float(v) for v in values) if values is not None else cfg.snr_grid_db
        if not grid:
            raise ValueError("sweep values must be non-empty")
        tag = f"r={cfg.channel.r:g}"
        return [(cfg, ("snr", None), tag, grid)]

    if values is None or len(values) == 0:
        raise ValueError("sweep values must be non-empty")
    points = []
    for v in values:
        if sweep is SweepKind.R:
            v = float(v)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"r sweep value {v} outside [0, 1]")
            point_cfg = cfg.with_channel(r=v)
            tag = f"r={v:g}"
        else:
            if int(v) != v:
                raise ValueError(f"P sweep value {v} is not an integer")
            v = int(v)
            if not 1 <= v <= cfg.channel.tap_line_length:
                raise ValueError(
                    f"P sweep value {v} outside [1, {cfg.channel.tap_line_length}]"
                )
            point_cfg = cfg.with_channel(P=v)
            tag = f"P={v}"
        points.append((point_cfg, (sweep.value, v), tag, cfg.snr_grid_db))
    return points


def _run_point_records(args):
    point_cfg, key, tag, snr_db = args
    res = run_point(point_cfg, snr_db, key, tag)
    n_bad = int(res.degenerate.sum())
    if n_bad > MAX_DEGENERATE_FRACTION * res.trials:
        raise RuntimeError(
            f"{n_bad}/{res.trials} trials had degenerate kurtosis at {tag}, {snr_db} dB"
        )
    return [
        SweepRecord(
            method=m,
            snr_db=res.snr_db,
            param_tag=tag,
            mean_nmse=res.mean_nmse(m),
            trials=res.trials,
            degenerate=n_bad,
        )
        for m in point_cfg.methods
    ]


def run_sweep(cfg, sweep, sweep_values=None, workers=1):
    """Mean NMSE for every (sweep value, SNR, method).

    All sweep values are validated before any trial runs. Points are
    independent and may be spread over ``workers`` processes; the output
    order does not depend on scheduling.
    """
    tasks = [
        (point_cfg, key, tag, snr)
        for point_cfg, key, tag, grid in _point_configs(cfg, sweep, sweep_values)
        for snr in grid
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_point_records, tasks))
    else:
        chunks = [_run_point_records(t) for t in tasks]
    return [rec for chunk in chunks for rec in chunk]


def sensing_accuracy(cfg, snr_db, trials):
    """Fraction of frames whose sensed scenario matches the generated one."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    hits = 0
    for t in range(trials):
        rng = trial_rng(cfg.master_seed, "sensing", float(snr_db), t)
        frame = simulate_frame(cfg, snr_db, rng)
        result = los_ence(frame.x_fd, frame.y_fd, cfg.sensing)
        hits += result.sensed is frame.channel.scenario
    return hits / trials


def retained_taps(h, rel_floor=1e-12):
    """Indices of taps that are non-zero above transform round-off."""
    a = np.abs(np.asarray(h))
    if a.size == 0 or a.max() == 0:
        return np.array([], dtype=np.intp)
    return np.flatnonzero(a > rel_floor * a.max())


@dataclass(frozen=True)
class ZetaCalibration:
    zeta: float
    accuracy: float
    los_kurtosis: np.ndarray
    nlos_kurtosis: np.ndarray

    @property
    def separable(self):
        return self.accuracy == 1.0


def _frame_kurtosis(cfg, snr_db, scenario, trials):
    out = np.empty(trials)
    for t in range(trials):
        rng = trial_rng(cfg.master_seed, "calibrate", scenario.value, float(snr_db), t)
        frame = simulate_frame(cfg, snr_db, rng, scenario)
        h_ls = cir_from_fd(ls_estimate(frame.y_fd, frame.x_fd))
        try:
            out[t] = kurtosis(h_ls)
        except DegenerateKurtosisError:
            out[t] = -np.inf  # always decided NLoS
    return out


def calibrate_zeta(cfg, snr_db, trials):
    """Kurtosis threshold minimizing misclassification on balanced LoS/NLoS frames.

    ``trials`` frames of each scenario are simulated, so the prior ``r`` plays
    no role. When several thresholds reach the minimum error, the one nearest
    the geometric mean of the two class medians is returned.
    """
    if trials < 100:
        raise ValueError(f"calibration needs at least 100 trials per class, got {trials}")
    k_los = _frame_kurtosis(cfg, snr_db, Scenario.LOS, trials)
    k_nlos = _frame_kurtosis(cfg, snr_db, Scenario.NLOS, trials)

    los_sorted = np.sort(k_los)
    nlos_sorted = np.sort(k_nlos)
    cuts = np.unique(np.concatenate([k_los, k_nlos]))
    cuts = cuts[np.isfinite(cuts)]
    # Threshold t in [cuts[i], cuts[i+1]) decides LoS iff kappa > t.
    missed_los = np.searchsorted(los_sorted, cuts, side="right")
    false_los = trials - np.searchsorted(nlos_sorted, cuts, side="right")
    errors = missed_los + false_los
    best = errors.min()

    finite_los = k_los[np.isfinite(k_los)]
    finite_nlos = k_nlos[np.isfinite(k_nlos)]
    if finite_los.size and finite_nlos.size:
        target = math.sqrt(max(np.median(finite_los), 1e-300) * max(np.median(finite_nlos), 1e-300))
    else:
        target = float(np.median(cuts))

    zeta, gap = None, np.inf
    for i in np.flatnonzero(errors == best):
        lo = cuts[i]
        hi = cuts[i + 1] if i + 1 < cuts.size else np.inf
        cand = min(max(target, lo), np.nextafter(hi, -np.inf))
        if abs(cand - target) < gap:
            zeta, gap = float(cand), abs(cand - target)

    accuracy = 1.0 - best / (2.0 * trials)
    if best > 0:
        log.warning(
            "LoS/NLoS kurtosis classes overlap at %g dB; best zeta=%.4g reaches accuracy %.4f",
            snr_db, zeta, accuracy,
        )
    return ZetaCalibration(
        zeta=zeta, accuracy=float(accuracy), los_kurtosis=k_los, nlos_kurtosis=k_nlos
    )
