"""OFDM hybrid-beamforming observation model and a greedy sparse-recovery baseline.

Observations are flat complex vectors with element ``(s, k, r)`` stored at
``s * N_k * N_rf_r + k * N_rf_r + r`` (C order over ``(N_s, N_k, N_rf_r)``).
Arrays are half-wavelength ULAs with the phase reference at element 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dictionary import DictionaryConfig
from .errors import InvalidArgument, InvalidConfig, RankDeficiency


@dataclass(frozen=True)
class WaveformConfig:
    n_k: int = 16
    delta_f: float = 1e6
    n_t: int = 8
    n_r: int = 8
    n_rf_t: int = 1
    n_rf_r: int = 4
    n_s: int = 4
    sigma_z2: float = 0.0
    t_cp: float | None = None

    def __post_init__(self) -> None:
        for name in ("n_k", "n_t", "n_r", "n_rf_t", "n_rf_r", "n_s"):
            if int(getattr(self, name)) < 1:
                raise InvalidConfig(f"{name} must be >= 1")
        if not self.delta_f > 0 or self.sigma_z2 < 0:
            raise InvalidConfig("delta_f must be positive and sigma_z2 non-negative")
        if self.t_cp is None:
            object.__setattr__(self, "t_cp", 1.0 / self.delta_f)
        if not 0 < self.t_cp <= 1.0 / self.delta_f * (1 + 1e-12):
            raise InvalidConfig("cyclic prefix must satisfy 0 < t_cp <= 1/delta_f")

    @property
    def n_obs(self) -> int:
        return self.n_s * self.n_k * self.n_rf_r


@dataclass(frozen=True)
class PilotFrame:
    """Combiners ``w[s, k, r]`` (shape ``(N_s, N_k, N_rf_r, N_r)``) and pilots
    ``x[s, k]`` (shape ``(N_s, N_k, N_t)``), all unit norm."""

    combiners: np.ndarray
    pilots: np.ndarray

    def check(self, cfg: WaveformConfig) -> None:
        want_w = (cfg.n_s, cfg.n_k, cfg.n_rf_r, cfg.n_r)
        want_x = (cfg.n_s, cfg.n_k, cfg.n_t)
        if self.combiners.shape != want_w or self.pilots.shape != want_x:
            raise InvalidArgument(
                f"frame shapes {self.combiners.shape}/{self.pilots.shape} "
                f"do not match config {want_w}/{want_x}")


def random_frame(cfg: WaveformConfig, seed=None) -> PilotFrame:
    """Unit-norm combiners and pilots with i.i.d. uniform phases."""
    rng = np.random.default_rng(seed)
    w = np.exp(2j * np.pi * rng.random((cfg.n_s, cfg.n_k, cfg.n_rf_r, cfg.n_r))) / np.sqrt(cfg.n_r)
    x = np.exp(2j * np.pi * rng.random((cfg.n_s, cfg.n_k, cfg.n_t))) / np.sqrt(cfg.n_t)
    return PilotFrame(w, x)


def steering(n: int, angle) -> np.ndarray:
    """ULA response ``exp(j pi n sin(angle)) / sqrt(N)``; one row per angle for array input."""
    if n < 1:
        raise InvalidArgument("array size must be >= 1")
    angle = np.asarray(angle, dtype=float)
    idx = np.arange(n)
    return np.exp(1j * np.pi * idx * np.sin(angle)[..., None]) / np.sqrt(n)


def _steering_derivative(n: int, angle) -> np.ndarray:
    angle = np.asarray(angle, dtype=float)
    idx = np.arange(n)
    return 1j * np.pi * idx * np.cos(angle)[..., None] * steering(n, angle)


def _beta_r(frame: PilotFrame, a_r: np.ndarray) -> np.ndarray:
    # (..., N_r) -> (..., N_s, N_k, N_rf_r)
    return np.einsum("skrn,...n->...skr", frame.combiners.conj(), a_r)


def _beta_t(frame: PilotFrame, a_t: np.ndarray) -> np.ndarray:
    # (..., N_t) -> (..., N_s, N_k)
    return np.einsum("skn,...n->...sk", frame.pilots, a_t)


def _delay_ramp(cfg: WaveformConfig, tau) -> np.ndarray:
    k = np.arange(cfg.n_k)
    return np.exp(-2j * np.pi * k * cfg.delta_f * np.asarray(tau, dtype=float)[..., None])


def _columns(tau, theta, phi, frame: PilotFrame, cfg: WaveformConfig) -> np.ndarray:
    """Dictionary columns for broadcastable parameter arrays, shape ``(..., N_s, N_k, N_rf_r)``."""
    br = _beta_r(frame, steering(cfg.n_r, phi))
    bt = _beta_t(frame, steering(cfg.n_t, theta))
    ramp = _delay_ramp(cfg, tau)
    return br * bt[..., None] * ramp[..., None, :, None]


def dictionary_column(tau: float, theta: float, phi: float, frame: PilotFrame,
                      cfg: WaveformConfig) -> np.ndarray:
    """Noiseless unit-amplitude observation of one path."""
    frame.check(cfg)
    return _columns(tau, theta, phi, frame, cfg).reshape(-1)


def synthesize(paths: Sequence[tuple[complex, float, float, float]], frame: PilotFrame,
               cfg: WaveformConfig, noise_seed=None) -> np.ndarray:
    """Observation ``sum_i alpha_i * column(tau_i, theta_i, dphi_i) + z``.

    ``paths`` holds ``(alpha, tau, theta, daoa)`` tuples. The noise is
    ``w^H z`` with ``z ~ CN(0, sigma_z2 I)`` at the antennas.
    """
    frame.check(cfg)
    y = np.zeros((cfg.n_s, cfg.n_k, cfg.n_rf_r), dtype=complex)
    for alpha, tau, theta, phi in paths:
        if tau > cfg.t_cp:
            raise InvalidArgument(f"delay {tau:.3e} s exceeds the cyclic prefix {cfg.t_cp:.3e} s")
        y += complex(alpha) * _columns(tau, theta, phi, frame, cfg)
    if cfg.sigma_z2 > 0:
        rng = np.random.default_rng(noise_seed)
        shape = (cfg.n_s, cfg.n_k, cfg.n_r)
        z = np.sqrt(cfg.sigma_z2 / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        y += np.einsum("skrn,skn->skr", frame.combiners.conj(), z)
    return y.reshape(-1)


def noise_covariance_blocks(frame: PilotFrame, sigma_z2: float = 1.0) -> np.ndarray:
    """Per-(s, k) blocks ``sigma_z2 * W_sk^H W_sk``, shape ``(N_s, N_k, N_rf_r, N_rf_r)``."""
    w = frame.combiners
    return sigma_z2 * np.einsum("skin,skjn->skij", w.conj(), w)


def whitening_blocks(frame: PilotFrame) -> np.ndarray:
    """Upper-triangular blocks ``R_sk`` with ``R_sk^H R_sk = (W_sk^H W_sk)^-1``."""
    gram = noise_covariance_blocks(frame)
    n_s, n_k, n_rf, _ = gram.shape
    out = np.empty_like(gram)
    for s in range(n_s):
        for k in range(n_k):
            g = gram[s, k]
            ev = np.linalg.eigvalsh(g)
            if ev[0] <= 1e-12 * max(ev[-1], 1e-300):
                raise RankDeficiency(f"combiner block (s={s}, k={k}) is singular")
            chol = np.linalg.cholesky(np.linalg.inv(g))
            out[s, k] = chol.conj().T
    return out


def whiten(v: np.ndarray, r_blocks: np.ndarray) -> np.ndarray:
    """Apply block-diagonal ``R`` to observation vectors (last axis flat)."""
    n_s, n_k, n_rf, _ = r_blocks.shape
    shaped = v.reshape(v.shape[:-1] + (n_s, n_k, n_rf))
    return np.einsum("skij,...skj->...ski", r_blocks, shaped).reshape(v.shape)


def greedy_recover(y: np.ndarray, dict_cfg: DictionaryConfig, frame: PilotFrame,
                   cfg: WaveformConfig, max_paths: int = 8,
                   residual_threshold: float | None = None
                   ) -> list[tuple[complex, float, float, float]]:
    """Orthogonal matching pursuit over the (TDoA, AoD, DAoA) dictionary.

    Correlations use noise-whitened columns. Amplitudes are refit by least
    squares after every selection. The default threshold is the expected
    whitened noise energy ``N_obs * sigma_z2`` plus a tiny relative floor.
    Returns ``(alpha, tau, theta, daoa)`` sorted by decreasing ``|alpha|``.
    """
    frame.check(cfg)
    taus, thetas, phis = dict_cfg.delays, dict_cfg.aods, dict_cfg.daoas
    if min(len(taus), len(thetas), len(phis)) == 0:
        raise InvalidConfig("empty dictionary")
    r_blocks = whitening_blocks(frame)
    cols = _columns(taus[:, None, None], thetas[None, :, None], phis[None, None, :], frame, cfg)
    cols = whiten(cols.reshape(-1, cfg.n_obs), r_blocks)
    norms = np.linalg.norm(cols, axis=1)
    yw = whiten(np.asarray(y, dtype=complex), r_blocks)
    if residual_threshold is None:
        residual_threshold = cfg.n_obs * cfg.sigma_z2 + 1e-20 * max(np.vdot(yw, yw).real, 1.0)
    support: list[int] = []
    alpha = np.zeros(0, dtype=complex)
    resid = yw.copy()
    while np.vdot(resid, resid).real >= residual_threshold and len(support) < max_paths:
        score = np.abs(cols.conj() @ resid) / np.where(norms > 0, norms, np.inf)
        j = int(np.argmax(score))
        if j in support:
            break
        support.append(j)
        basis = cols[support].T
        alpha, *_ = np.linalg.lstsq(basis, yw, rcond=None)
        resid = yw - basis @ alpha
    out = []
    for a, j in zip(alpha, support):
        it, ith, iph = np.unravel_index(j, (len(taus), len(thetas), len(phis)))
        out.append((complex(a), float(taus[it]), float(thetas[ith]), float(phis[iph])))
    out.sort(key=lambda p: -abs(p[0]))
    return out


def mean_jacobian(paths: Sequence[tuple[complex, float, float, float]], frame: PilotFrame,
                  cfg: WaveformConfig) -> np.ndarray:
    """Derivative of the noiseless observation, ``(N_obs, 3 N_p)``.

    Columns per path are ordered ``(theta, daoa, tau)``.
    """
    frame.check(cfg)
    k = np.arange(cfg.n_k)
    blocks = []
    for alpha, tau, theta, phi in paths:
        br = _beta_r(frame, steering(cfg.n_r, phi))
        bt = _beta_t(frame, steering(cfg.n_t, theta))
        dbr = _beta_r(frame, _steering_derivative(cfg.n_r, phi))
        dbt = _beta_t(frame, _steering_derivative(cfg.n_t, theta))
        ramp = _delay_ramp(cfg, tau)[None, :, None]
        d_theta = alpha * ramp * br * dbt[..., None]
        d_phi = alpha * ramp * dbr * bt[..., None]
        d_tau = (-2j * np.pi * k * cfg.delta_f)[None, :, None] * alpha * ramp * br * bt[..., None]
        blocks += [d_theta.reshape(-1), d_phi.reshape(-1), d_tau.reshape(-1)]
    return np.stack(blocks, axis=1)


def measurement_fim(paths: Sequence[tuple[complex, float, float, float]], frame: PilotFrame,
                    cfg: WaveformConfig) -> np.ndarray:
    """Fisher information of the per-path ``(theta, daoa, tau)`` with known amplitudes.

    ``J = (2 / sigma_z2) Re{(R D)^H (R D)}`` where ``D`` is the mean
    Jacobian and ``R`` whitens the combined noise.
    """
    if not cfg.sigma_z2 > 0:
        raise InvalidConfig("measurement_fim needs sigma_z2 > 0")
    d = whiten(mean_jacobian(paths, frame, cfg).T, whitening_blocks(frame)).T
    j = 2.0 / cfg.sigma_z2 * np.real(d.conj().T @ d)
    return 0.5 * (j + j.T)
