"""Deterministic parallel Monte Carlo for missed detection and false alarm.

Experiments run as drops x frames: a drop fixes the path angles (and hence
the effective covariance), frames are independent fading/noise realizations
inside the drop, and missed-detection counts are pooled over all drops and
frames per SNR point.  Per-drop seeds come from a fixed 64-bit mix of the
master seed and the drop index, and the per-drop frame stream is chunked by
a config-determined size, so results are byte-identical for any worker
count.

Two estimators are provided: "reduced" scores the low-dimensional ratio form
of the statistic (a weighted signal vector plus white noise over an
independent chi-square), "full" synthesizes antenna-level frames and runs
the detector arithmetic.  Both share the pooling and determinism contract.
"""

from __future__ import annotations

import logging
import math
import multiprocessing
from dataclasses import dataclass
from functools import partial

import numpy as np

from .analysis import (
    EffectiveCovariance,
    asymptotic_md,
    build_R_general,
    build_R_iid,
    build_R_single_path,
    fa_closed_form,
    hermitian_eigenvalues,
)
from .channel import ChannelConfig, _complex_normal, correlation_matrix, sample_paths
from .codebook import NAMED_DESIGNS, Codebook, build_approach_codebook
from .detector import make_sync_signal, threshold_from_fa

logger = logging.getLogger(__name__)

DESK_P_FA = 1e-2

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_CODEBOOK_TAG = 1 << 48


def mix64(state: int) -> int:
    """Fixed 64-bit scrambler (splitmix64 finalizer)."""
    z = state & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Entry `index` of the splittable seed stream rooted at master_seed."""
    return mix64((master_seed + (index + 1) * _GOLDEN) & _MASK64)


# ===== Configuration and result rows =====


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one Monte Carlo experiment.

    snr_db_list entries are -10*log10(noise_var); the desk-scale false-alarm
    default of 1e-2 keeps trial counts tractable, the 1e-4 production target
    is a config choice away.
    """

    approach: str
    k: int
    m_t: int
    m_r: int
    n_t: int
    n_r: int
    l: int
    channel: ChannelConfig
    snr_db_list: tuple[float, ...]
    p_fa_target: float = DESK_P_FA
    drops: int = 100
    frames_per_drop: int = 1000
    estimator: str = "reduced"
    master_seed: int = 1
    zc_root: int = 1

    def __post_init__(self):
        object.__setattr__(self, "snr_db_list", tuple(float(s) for s in self.snr_db_list))
        if self.approach not in NAMED_DESIGNS:
            raise ValueError(f"unknown approach {self.approach!r}")
        if self.estimator not in ("reduced", "full"):
            raise ValueError(f"estimator must be 'reduced' or 'full', got {self.estimator!r}")
        if self.drops < 1 or self.frames_per_drop < 1:
            raise ValueError("drops and frames_per_drop must be at least 1")
        if not 0.0 < self.p_fa_target < 1.0:
            raise ValueError("false-alarm target must be inside (0, 1)")
        if not 1 <= self.n_t < self.l:
            raise ValueError("need 1 <= n_t < l for a well-posed detector")
        for mine, theirs, name in ((self.m_t, self.channel.m_t, "m_t"),
                                   (self.m_r, self.channel.m_r, "m_r"),
                                   (self.k, self.channel.k, "k")):
            if mine != theirs:
                raise ValueError(f"experiment {name}={mine} disagrees with channel {name}={theirs}")


@dataclass(frozen=True)
class ResultRow:
    """One estimate: an MD point of a sweep, or (for noise-only runs) the
    false-alarm fraction carried in the same probability fields."""

    approach: str
    k: int
    snr_db: float
    gamma: float
    p_fa_target: float
    p_md_hat: float
    p_md_stderr: float
    p_md_asym: float | None
    trials: int
    seed: int


def experiment_codebook(config: ExperimentConfig) -> Codebook:
    """The per-run codebook; random-phase draws once from a dedicated seed."""
    return build_approach_codebook(
        config.approach, config.m_t, config.n_t, config.m_r, config.n_r, config.k,
        seed=derive_seed(config.master_seed, _CODEBOOK_TAG), zc_root=config.zc_root)


# ===== Shared drop machinery =====


def _map_drops(task, drops: int, workers: int) -> list:
    if workers <= 1 or drops <= 1:
        return [task(d) for d in range(drops)]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=min(workers, drops)) as pool:
        return pool.map(task, range(drops), chunksize=max(1, drops // (workers * 4)))


def _merge_counts(results, drops: int, n_points: int) -> tuple[np.ndarray, int]:
    kept = [r for r in results if r is not None]
    skipped = drops - len(kept)
    if skipped:
        logger.warning("%d of %d drops skipped after factorization failures", skipped, drops)
    if not kept:
        raise RuntimeError("every drop failed; no trials accumulated")
    counts = np.zeros(n_points, dtype=np.int64)
    trials = 0
    for cnt, frames in kept:
        counts += cnt
        trials += frames
    return counts, trials


def _rows_from_counts(config, gamma, counts, trials, asym) -> list:
    rows = []
    for snr, cnt, pred in zip(config.snr_db_list, counts, asym):
        p = int(cnt) / trials
        rows.append(ResultRow(
            approach=config.approach, k=config.k, snr_db=float(snr), gamma=gamma,
            p_fa_target=config.p_fa_target, p_md_hat=p,
            p_md_stderr=math.sqrt(p * (1.0 - p) / trials),
            p_md_asym=pred, trials=trials, seed=config.master_seed))
    return rows


def _asymptotic_fill(config, gamma, noise_vars, cov: EffectiveCovariance | None):
    """Analytic MD predictions per SNR point, or None where undefined."""
    if cov is None or cov.rank == 0:
        return [None] * len(noise_vars)
    out = []
    for nv in noise_vars:
        pred = asymptotic_md(cov, gamma, nv, config.k, config.l, config.n_r, config.n_t)
        out.append(pred.value)
    return out


def _prediction_covariance(config, codebook, psi) -> EffectiveCovariance | None:
    """Drop-independent effective covariance, when one exists.

    The i.i.d. model has a fixed covariance.  Under the geometric model the
    spectrum is angle-free only for a single path through the flat design,
    and the single-path analysis additionally needs a full-rank slot
    correlation.
    """
    if config.channel.model == "iid":
        return build_R_iid(codebook, psi)
    if config.channel.p == 1 and config.approach == "omni-golay":
        psi_eigs = hermitian_eigenvalues(psi)
        full_rank = int(np.sum(psi_eigs > config.k * psi_eigs[0] * 1e-10)) == config.k
        if full_rank:
            cov, _ = build_R_single_path(codebook, 0.0, 0.0, psi)
            return cov
    return None


# ===== Reduced estimator =====


def _cov_factor(cov: EffectiveCovariance) -> np.ndarray:
    """Tall factor S with S S^H = cov (columns spanning the numerical rank)."""
    w, v = np.linalg.eigh(cov.matrix)
    w = w[::-1]
    v = v[:, ::-1]
    r = cov.rank
    return v[:, :r] * np.sqrt(np.maximum(w[:r], 0.0))


def _reduced_chunk(q: int) -> int:
    return min(1 << 16, max(1, (1 << 20) // max(q, 1)))


@dataclass(frozen=True)
class _ReducedPlan:
    config: ExperimentConfig
    t_ratio: float
    noise_vars: tuple[float, ...]
    codebook: Codebook | None
    psi: np.ndarray | None
    fixed_factor: np.ndarray | None


def _reduced_drop(plan: _ReducedPlan, drop_index: int):
    cfg = plan.config
    rng = np.random.default_rng(derive_seed(cfg.master_seed, drop_index))
    q = cfg.k * cfg.n_r * cfg.n_t
    d_dim = cfg.k * cfg.n_r * (cfg.l - cfg.n_t)
    if plan.fixed_factor is not None:
        factor = plan.fixed_factor
    else:
        paths = sample_paths(cfg.channel, rng)
        try:
            if cfg.channel.p == 1:
                cov, _ = build_R_single_path(
                    plan.codebook, float(paths.theta_r[0]), float(paths.theta_t[0]), plan.psi)
            else:
                cov = build_R_general(plan.codebook, paths, cfg.channel.beta, plan.psi)
            factor = _cov_factor(cov)
        except (np.linalg.LinAlgError, ValueError) as exc:
            logger.warning("drop %d skipped: %s", drop_index, exc)
            return None
    r = factor.shape[1]
    amp_factor = math.sqrt(cfg.l / cfg.n_t) * factor
    counts = np.zeros(len(plan.noise_vars), dtype=np.int64)
    chunk = _reduced_chunk(q)
    remaining = cfg.frames_per_drop
    while remaining > 0:
        c = min(chunk, remaining)
        remaining -= c
        if r > 0:
            g = amp_factor @ _complex_normal(rng, (r, c))
        else:
            g = np.zeros((q, c), dtype=np.complex128)
        z2 = _complex_normal(rng, (q, c))
        y1 = rng.gamma(d_dim, 1.0, size=c)
        for i, nv in enumerate(plan.noise_vars):
            num = np.sum(np.abs(g + math.sqrt(nv) * z2) ** 2, axis=0)
            counts[i] += int(np.sum(num < plan.t_ratio * nv * y1))
    return counts, cfg.frames_per_drop


def run_md_reduced(
    config: ExperimentConfig,
    workers: int = 1,
    cov_override: EffectiveCovariance | None = None,
) -> list[ResultRow]:
    """Missed-detection sweep through the reduced ratio form.

    Per frame the squared noise norm in the denominator is drawn directly as
    a Gamma(K*N_r*(L-N_t)) variate; the numerator draws the signal vector
    through the covariance factor and shares its noise draw across the SNR
    list (common random numbers).

    cov_override injects a fixed effective covariance for diagnostics (e.g.
    a zero matrix turns the run into a noise-only calibration).
    """
    if not config.snr_db_list:
        return []
    gamma = threshold_from_fa(config.p_fa_target, config.k, config.l, config.n_r, config.n_t)
    noise_vars = tuple(10.0 ** (-s / 10.0) for s in config.snr_db_list)
    codebook = experiment_codebook(config)
    corr = correlation_matrix(config.channel)
    fixed_cov = cov_override
    if fixed_cov is None and config.channel.model == "iid":
        fixed_cov = build_R_iid(codebook, corr.psi)
    plan = _ReducedPlan(
        config=config, t_ratio=gamma / (1.0 - gamma), noise_vars=noise_vars,
        codebook=None if fixed_cov is not None else codebook,
        psi=None if fixed_cov is not None else corr.psi,
        fixed_factor=_cov_factor(fixed_cov) if fixed_cov is not None else None)
    results = _map_drops(partial(_reduced_drop, plan), config.drops, workers)
    counts, trials = _merge_counts(results, config.drops, len(noise_vars))
    pred_cov = fixed_cov if cov_override is not None else _prediction_covariance(
        config, codebook, corr.psi)
    asym = _asymptotic_fill(config, gamma, noise_vars, pred_cov)
    return _rows_from_counts(config, gamma, counts, trials, asym)


# ===== Full estimator =====


def _full_chunk(k: int, m_r: int, l: int) -> int:
    return min(4096, max(1, (1 << 19) // (k * m_r * l)))


@dataclass(frozen=True)
class _FullPlan:
    config: ExperimentConfig
    gamma: float
    noise_vars: tuple[float, ...]
    codebook: Codebook
    x: np.ndarray
    sqrt_factor: np.ndarray
    noise_only: bool = False


def _batch_statistic(y: np.ndarray, xc: np.ndarray, inv_xxh: np.ndarray,
                     minv: np.ndarray) -> np.ndarray:
    """Detector statistic for a (frames, slots, N_r, L) batch of observations."""
    a = np.einsum("ckal,lt->ckat", y, xc)
    t1 = np.einsum("ckat,ts->ckas", a, inv_xxh)
    num = np.einsum("ckas,ckbs,kba->ck", t1, a.conj(), minv).real
    den = np.einsum("ckal,ckbl,kba->ck", y, y.conj(), minv).real
    return num.sum(axis=1) / den.sum(axis=1)


def _full_drop(plan: _FullPlan, drop_index: int):
    cfg = plan.config
    cb = plan.codebook
    rng = np.random.default_rng(derive_seed(cfg.master_seed, drop_index))
    x = plan.x
    xc = x.conj().T
    inv_xxh = np.linalg.inv(x @ x.conj().T)
    fh = np.stack([f.conj().T for f in cb.f])
    minv = np.stack([np.linalg.inv(f.conj().T @ f) for f in cb.f])
    w_stack = np.stack(cb.w)
    geometric = cfg.channel.model == "geometric" and not plan.noise_only
    b_mix = None
    sqrt_beta = None
    if geometric:
        paths = sample_paths(cfg.channel, rng)
        u = np.stack([np.exp(2j * np.pi * t * np.arange(cfg.m_r)) for t in paths.theta_r], axis=1)
        v = np.stack([np.exp(2j * np.pi * t * np.arange(cfg.m_t)) for t in paths.theta_t], axis=1)
        b_mix = np.empty((cfg.k, cfg.channel.p, cfg.n_r, cfg.n_t), dtype=np.complex128)
        for k in range(cfg.k):
            for p in range(cfg.channel.p):
                b_mix[k, p] = np.outer(fh[k] @ u[:, p], v[:, p].conj() @ cb.w[k])
        sqrt_beta = np.sqrt(np.asarray(cfg.channel.beta))
    counts = np.zeros(max(len(plan.noise_vars), 1), dtype=np.int64)
    chunk = _full_chunk(cfg.k, cfg.m_r, cfg.l)
    remaining = cfg.frames_per_drop
    while remaining > 0:
        c = min(chunk, remaining)
        remaining -= c
        if plan.noise_only:
            z = _complex_normal(rng, (c, cfg.k, cfg.m_r, cfg.l))
            y = np.einsum("kam,ckml->ckal", fh, z)
            tvals = _batch_statistic(y, xc, inv_xxh, minv)
            counts[0] += int(np.sum(tvals > plan.gamma))
            continue
        if geometric:
            xi = _complex_normal(rng, (cfg.channel.p, cfg.k, c))
            alpha = np.einsum("kj,pjc->pkc", plan.sqrt_factor, xi) * sqrt_beta[:, None, None]
            geff = np.einsum("pkc,kpab->ckab", alpha, b_mix)
        else:
            xi = _complex_normal(rng, (c, cfg.k, cfg.m_r * cfg.m_t))
            gains = np.einsum("kj,cjm->ckm", plan.sqrt_factor, xi)
            h = gains.reshape(c, cfg.k, cfg.m_t, cfg.m_r).swapaxes(2, 3)
            geff = np.einsum("kam,ckmt,ktb->ckab", fh, h, w_stack)
        ys = np.einsum("ckab,bl->ckal", geff, x)
        z = _complex_normal(rng, (c, cfg.k, cfg.m_r, cfg.l))
        yz = np.einsum("kam,ckml->ckal", fh, z)
        for i, nv in enumerate(plan.noise_vars):
            tvals = _batch_statistic(ys + math.sqrt(nv) * yz, xc, inv_xxh, minv)
            counts[i] += int(np.sum(tvals <= plan.gamma))
    return counts, cfg.frames_per_drop


def run_md_full(config: ExperimentConfig, workers: int = 1) -> list[ResultRow]:
    """Missed-detection sweep through antenna-level frame synthesis.

    Frames are drawn in config-determined chunks (gain variables first, then
    antenna noise) and scored with the same arithmetic as the single-frame
    detector; noise draws are shared across the SNR list.
    """
    if not config.snr_db_list:
        return []
    gamma = threshold_from_fa(config.p_fa_target, config.k, config.l, config.n_r, config.n_t)
    noise_vars = tuple(10.0 ** (-s / 10.0) for s in config.snr_db_list)
    codebook = experiment_codebook(config)
    corr = correlation_matrix(config.channel)
    signal = make_sync_signal(config.n_t, config.l, config.k)
    plan = _FullPlan(config=config, gamma=gamma, noise_vars=noise_vars, codebook=codebook,
                     x=signal.x[0], sqrt_factor=corr.sqrt_factor)
    results = _map_drops(partial(_full_drop, plan), config.drops, workers)
    counts, trials = _merge_counts(results, config.drops, len(noise_vars))
    asym = _asymptotic_fill(config, gamma, noise_vars,
                            _prediction_covariance(config, codebook, corr.psi))
    return _rows_from_counts(config, gamma, counts, trials, asym)


# ===== False alarm =====


def _fa_reduced_drop(config: ExperimentConfig, gamma: float, drop_index: int):
    rng = np.random.default_rng(derive_seed(config.master_seed, drop_index))
    q = config.k * config.n_r * config.n_t
    d_dim = config.k * config.n_r * (config.l - config.n_t)
    count = 0
    chunk = _reduced_chunk(q)
    remaining = config.frames_per_drop
    while remaining > 0:
        c = min(chunk, remaining)
        remaining -= c
        xnum = rng.gamma(q, 1.0, size=c)
        yden = rng.gamma(d_dim, 1.0, size=c)
        count += int(np.sum(xnum * (1.0 - gamma) > gamma * yden))
    return np.array([count], dtype=np.int64), config.frames_per_drop


def estimate_fa(config: ExperimentConfig, workers: int = 1,
                gamma: float | None = None) -> ResultRow:
    """Noise-only run; the probability fields carry the false-alarm fraction.

    gamma defaults to the threshold calibrated for config.p_fa_target; an
    explicit value (including 0) overrides it.  The analytic column holds the
    closed-form false alarm at the same threshold.
    """
    if gamma is None:
        gamma = threshold_from_fa(config.p_fa_target, config.k, config.l, config.n_r, config.n_t)
    if not 0.0 <= gamma < 1.0:
        raise ValueError("threshold must be inside [0, 1)")
    if config.estimator == "reduced":
        results = _map_drops(partial(_fa_reduced_drop, config, gamma), config.drops, workers)
    else:
        codebook = experiment_codebook(config)
        signal = make_sync_signal(config.n_t, config.l, config.k)
        plan = _FullPlan(config=config, gamma=gamma, noise_vars=(), codebook=codebook,
                         x=signal.x[0], sqrt_factor=np.eye(config.k), noise_only=True)
        results = _map_drops(partial(_full_drop, plan), config.drops, workers)
    counts, trials = _merge_counts(results, config.drops, 1)
    p = int(counts[0]) / trials
    return ResultRow(
        approach=config.approach, k=config.k, snr_db=math.nan, gamma=gamma,
        p_fa_target=config.p_fa_target, p_md_hat=p,
        p_md_stderr=math.sqrt(p * (1.0 - p) / trials),
        p_md_asym=fa_closed_form(gamma, config.k, config.l, config.n_r, config.n_t),
        trials=trials, seed=config.master_seed)


# ===== Sweeps, slopes, CSV =====


def sweep(config: ExperimentConfig, workers: int = 1) -> list[ResultRow]:
    """One ResultRow per SNR point, using the configured estimator."""
    if config.estimator == "full":
        return run_md_full(config, workers=workers)
    return run_md_reduced(config, workers=workers)


def estimate_slope(rows) -> float:
    """Diversity-order estimate from two sweep rows at distinct SNRs.

    slope = (log10 p_low - log10 p_high) / (dB gap / 10); both MD estimates
    must sit inside the low-probability regime (0, 0.1).
    """
    if len(rows) != 2:
        raise ValueError(f"need exactly two rows, got {len(rows)}")
    lo, hi = sorted(rows, key=lambda r: r.snr_db)
    if not lo.snr_db < hi.snr_db:
        raise ValueError("rows must sit at distinct SNRs")
    for row in (lo, hi):
        if not 0.0 < row.p_md_hat < 0.1:
            raise ValueError(
                f"not applicable: p_md_hat={row.p_md_hat!r} at {row.snr_db} dB is outside (0, 0.1)")
    return (math.log10(lo.p_md_hat) - math.log10(hi.p_md_hat)) / ((hi.snr_db - lo.snr_db) / 10.0)


CSV_HEADER = "approach,k,snr_db,gamma,p_fa_target,p_md_hat,p_md_stderr,p_md_asym,trials,seed"


def results_to_csv(rows) -> str:
    """Canonical CSV rendering; missing analytic values become empty fields."""
    lines = [CSV_HEADER]
    for r in rows:
        asym = "" if r.p_md_asym is None else repr(float(r.p_md_asym))
        lines.append(",".join([
            r.approach, str(r.k), repr(float(r.snr_db)), repr(float(r.gamma)),
            repr(float(r.p_fa_target)), repr(float(r.p_md_hat)), repr(float(r.p_md_stderr)),
            asym, str(r.trials), str(r.seed)]))
    return "\n".join(lines) + "\n"


def write_results_csv(rows, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(results_to_csv(rows))
