"""Detection-error analysis: effective covariances, asymptotic missed
detection, the generalized-F tail law, and the closed-form false alarm.

The effective covariance R is the covariance of the stacked post-combining
signal means g = [vec(F_1^H H_1 W_1); ...; vec(F_K^H H_K W_K)], stacked
column-major per slot (transmit-stream major, receive-stream minor).  Missed
detection of the ratio detector at threshold gamma reduces to the event

    || sqrt(L/N_t) g + z2 ||^2 / || z1 ||^2  <  gamma / (1 - gamma)

with z2 of dimension K*N_r*N_t and z1 of dimension K*N_r*(L - N_t), both
white with variance noise_var, and the low-noise tail of that ratio is
governed by the nonzero eigenvalues of R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import PathSet, steering
from .codebook import Codebook

HERMITIAN_TOL = 1e-10
RANK_REL_TOL = 1e-10


# ===== Eigenvalue utilities =====


def hermitian_eigenvalues(h: np.ndarray) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix, descending.

    Raises ValueError when the matrix deviates from Hermitian symmetry by
    more than HERMITIAN_TOL (relative to the largest entry magnitude, with an
    absolute floor of the same size).
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"need a square matrix, got shape {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)
    dev = float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0
    if dev > HERMITIAN_TOL * scale:
        raise ValueError(f"matrix is not Hermitian (worst asymmetry {dev:.3e})")
    return np.linalg.eigvalsh(h)[::-1].copy()


def _numerical_rank(eigs: np.ndarray, dim: int) -> int:
    if eigs.size == 0:
        return 0
    cut = dim * max(float(eigs[0]), 0.0) * RANK_REL_TOL
    return int(np.sum(eigs > cut))


@dataclass(frozen=True)
class EffectiveCovariance:
    """Effective signal covariance with its spectrum precomputed.

    eigs are descending; rank counts eigenvalues above
    dim * max_eig * RANK_REL_TOL.
    """

    matrix: np.ndarray
    eigs: np.ndarray
    rank: int
    model_tag: str


def _make_covariance(matrix: np.ndarray, model_tag: str) -> EffectiveCovariance:
    matrix = np.ascontiguousarray(matrix)
    eigs = hermitian_eigenvalues(matrix)
    matrix.setflags(write=False)
    eigs.setflags(write=False)
    return EffectiveCovariance(matrix=matrix, eigs=eigs,
                               rank=_numerical_rank(eigs, matrix.shape[0]),
                               model_tag=model_tag)


def covariance_from_eigenvalues(eigs, model_tag: str = "eigs") -> EffectiveCovariance:
    """Wraps an explicit spectrum (e.g. from a config file) as a covariance."""
    arr = np.sort(np.asarray(eigs, dtype=np.float64))[::-1].copy()
    if arr.size and arr[-1] < 0:
        raise ValueError("eigenvalues must be nonnegative")
    return _make_covariance(np.diag(arr).astype(np.complex128), model_tag)


# ===== Effective covariance builders =====


def _path_vectors(codebook: Codebook, theta_r: float, theta_t: float) -> list[np.ndarray]:
    """Per-slot mean direction a_k = (W_k^T v*) kron (F_k^H u), length N_t*N_r."""
    u = steering(theta_r, codebook.m_r)
    v = steering(theta_t, codebook.m_t)
    out = []
    for wk, fk in zip(codebook.w, codebook.f):
        tx = wk.T @ v.conj()
        rx = fk.conj().T @ u
        out.append(np.kron(tx, rx))
    return out


def build_R_general(codebook: Codebook, paths: PathSet, beta, psi: np.ndarray) -> EffectiveCovariance:
    """Effective covariance for a P-path geometric channel.

    Block (k, l) is psi[k, l] * sum_p beta_p * a_kp a_lp^H with a_kp the
    per-slot mean direction of path p.
    """
    k = codebook.k
    q0 = codebook.n_t * codebook.n_r
    beta = np.asarray(beta, dtype=np.float64)
    r = np.zeros((k * q0, k * q0), dtype=np.complex128)
    for p in range(beta.shape[0]):
        a = _path_vectors(codebook, float(paths.theta_r[p]), float(paths.theta_t[p]))
        for i in range(k):
            for j in range(k):
                r[i * q0:(i + 1) * q0, j * q0:(j + 1) * q0] += (
                    psi[i, j] * beta[p] * np.outer(a[i], a[j].conj()))
    return _make_covariance(r, "general")


def build_R_single_path(
    codebook: Codebook, theta_r: float, theta_t: float, psi: np.ndarray
) -> tuple[EffectiveCovariance, np.ndarray]:
    """Effective covariance for one path, plus the K x K reduced matrix.

    The reduced matrix psi * diag(a_k^H a_k) shares the nonzero eigenvalues
    of the full K*N_r*N_t covariance; for constant-power designs like
    omni-golay, a_k^H a_k = N_r * N_t at every angle, so the spectrum does
    not depend on the path direction.
    """
    a = _path_vectors(codebook, theta_r, theta_t)
    k = codebook.k
    q0 = codebook.n_t * codebook.n_r
    r = np.zeros((k * q0, k * q0), dtype=np.complex128)
    for i in range(k):
        for j in range(k):
            r[i * q0:(i + 1) * q0, j * q0:(j + 1) * q0] = psi[i, j] * np.outer(a[i], a[j].conj())
    norms = np.array([float(np.real(np.vdot(ak, ak))) for ak in a])
    reduced = psi * norms[None, :]
    return _make_covariance(r, "single-path"), reduced


def build_R_iid(codebook: Codebook, psi: np.ndarray) -> EffectiveCovariance:
    """Effective covariance for the entrywise independent channel.

    Block (k, l) is psi[k, l] * (W_k^T W_l^*) kron (F_k^H F_l); with
    omnidirectional unitary slots and a disjoint schedule this is the
    identity.
    """
    k = codebook.k
    q0 = codebook.n_t * codebook.n_r
    r = np.empty((k * q0, k * q0), dtype=np.complex128)
    for i in range(k):
        for j in range(k):
            tx = codebook.w[i].T @ codebook.w[j].conj()
            rx = codebook.f[i].conj().T @ codebook.f[j]
            r[i * q0:(i + 1) * q0, j * q0:(j + 1) * q0] = psi[i, j] * np.kron(tx, rx)
    return _make_covariance(r, "iid")


# ===== Asymptotic missed detection =====


@dataclass(frozen=True)
class AsymptoticMD:
    """Low-noise missed-detection asymptote and its building blocks."""

    rank: int
    eig_product: float
    value: float
    log_value: float


def _log_comb(n: int, m: int) -> float:
    # math.comb is exact big-integer; math.log accepts arbitrarily large ints.
    return math.log(math.comb(n, m))


def asymptotic_md(
    cov: EffectiveCovariance,
    gamma: float,
    noise_var: float,
    k: int,
    l: int,
    n_r: int,
    n_t: int,
) -> AsymptoticMD:
    """Leading missed-detection term as the noise variance goes to zero.

    value = (N_t * noise_var * gamma / (L * (1 - gamma)))^r
            * C(K*L*N_r - 1, r) * prod_m 1/lambda_m

    over the r nonzero eigenvalues lambda_m of cov.  Computed in the log
    domain; value overflows to inf / underflows to 0 gracefully.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"threshold must be inside (0, 1), got {gamma!r}")
    if noise_var <= 0:
        raise ValueError("noise variance must be positive")
    r = cov.rank
    if r == 0:
        raise ValueError("covariance has rank 0; the asymptote is undefined")
    n = k * l * n_r - 1
    if r > n:
        raise ValueError(f"rank {r} exceeds the ratio's numerator budget {n}")
    lams = cov.eigs[:r]
    log_lam_sum = float(np.sum(np.log(lams)))
    log_scale = math.log(n_t) + math.log(noise_var) + math.log(gamma) \
        - math.log(l) - math.log1p(-gamma)
    log_value = r * log_scale + _log_comb(n, r) - log_lam_sum
    try:
        value = math.exp(log_value)
    except OverflowError:
        value = math.inf
    try:
        eig_product = math.exp(log_lam_sum)
    except OverflowError:
        eig_product = math.inf
    return AsymptoticMD(rank=r, eig_product=eig_product, value=value, log_value=log_value)


# ===== Generalized-F ratio tail (weighted chi-square over chi-square) =====


@dataclass(frozen=True)
class GeneralizedFRatio:
    """Ratio of independent weighted sums of unit-mean exponentials.

    lam holds the numerator weights, sigma the denominator weights.
    """

    lam: tuple[float, ...]
    sigma: tuple[float, ...]

    def __post_init__(self):
        if not self.lam or not self.sigma:
            raise ValueError("need at least one weight on each side")
        if any(v <= 0 for v in self.lam) or any(v <= 0 for v in self.sigma):
            raise ValueError("weights must be positive")


def _homogeneous_sum(order: int, sigmas) -> float:
    """Complete homogeneous symmetric polynomial h_order(sigmas)."""
    h = [0.0] * (order + 1)
    h[0] = 1.0
    for s in sigmas:
        for m in range(1, order + 1):
            h[m] += s * h[m - 1]
    return h[order]


def lemma1_cdf(ratio: GeneralizedFRatio, t: float) -> float:
    """Small-t tail law P{ratio < t} ~ t^M * h_M(sigma) / prod(lam).

    For a single unit weight on each side the exact law is t / (1 + t), which
    the approximation matches to first order.
    """
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    m = len(ratio.lam)
    if len(set(ratio.sigma)) == 1:
        # Equal denominator weights: h_M reduces to a single binomial term.
        n = len(ratio.sigma)
        h = math.comb(m + n - 1, m) * ratio.sigma[0] ** m
    else:
        h = _homogeneous_sum(m, ratio.sigma)
    inv_lam = math.prod(1.0 / v for v in ratio.lam)
    return (t ** m) * inv_lam * h


def chi_moment(sigma, n: int) -> float:
    """n-th raw moment of a weighted sum of unit-mean exponentials:
    E{Y^n} = n! * h_n(sigma)."""
    if n < 0:
        raise ValueError("moment order must be nonnegative")
    sig = tuple(float(s) for s in sigma)
    if any(s <= 0 for s in sig):
        raise ValueError("weights must be positive")
    return math.factorial(n) * _homogeneous_sum(n, sig)


# ===== False alarm =====


def fa_closed_form_log(gamma: float, k: int, l: int, n_r: int, n_t: int) -> float:
    """Natural log of the false-alarm probability at threshold gamma."""
    if k * n_r * n_t >= k * l * n_r:
        raise ValueError("signal dimension must be below the observation dimension")
    if gamma <= 0.0:
        return 0.0
    if gamma >= 1.0:
        return -math.inf
    n = k * l * n_r - 1
    a = k * n_r * n_t
    log_g = math.log(gamma)
    log_1mg = math.log1p(-gamma)
    logs = [_log_comb(n, m) + m * log_g + (n - m) * log_1mg for m in range(a)]
    top = max(logs)
    return top + math.log(math.fsum(math.exp(v - top) for v in logs))


def fa_closed_form(gamma: float, k: int, l: int, n_r: int, n_t: int) -> float:
    """False-alarm probability of the ratio detector at threshold gamma.

    Equals the binomial tail P{Bin(K*L*N_r - 1, gamma) < K*N_r*N_t}, i.e. the
    upper tail of a Beta(K*N_r*N_t, K*N_r*(L - N_t)) variable at gamma.
    """
    return math.exp(fa_closed_form_log(gamma, k, l, n_r, n_t))
