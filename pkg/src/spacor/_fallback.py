"""Pure numpy implementations of the numerical kernels.

Signatures mirror the compiled ``_kernels`` extension exactly; see
:mod:`spacor.kernels` for the selection logic.
"""

import numpy as np

_CHUNK = 2048


def chip_correlations(d, v0, n_valid, n_pulse, chip, K, a):
    """Per-slot correlation of a delayed chirp with the reference chirp.

    Parameters
    ----------
    d : (T,) float array
        Delay offsets in samples.
    v0 : float
        Offset (samples) of the first sample inside the reference pulse.
    n_valid : int
        Number of samples ``v = v0 + i`` lying in the reference support.
    n_pulse : float
        Pulse length in samples (T_r * F_s).
    chip : float
        Slot length in samples (T_c * F_s).
    K : int
        Number of slots.
    a : float
        Chirp phase constant pi * mu * T_s**2.

    Returns
    -------
    (K, T) complex array
    """
    d = np.asarray(d, dtype=np.float64)
    v = v0 + np.arange(n_valid, dtype=np.float64)
    c = 0.5 * n_pulse
    out = np.zeros((K, d.size), dtype=np.complex128)
    for j, dj in enumerate(d):
        u = v - dj
        r = np.rint(u)
        u = np.where(np.abs(u - r) < 1e-7, r, u)
        ok = (u >= 0.0) & (u < n_pulse)
        if not np.any(ok):
            continue
        k = np.minimum((u[ok] / chip + 1e-9).astype(np.int64), K - 1)
        ph = np.exp(1j * a * (dj * dj - 2.0 * dj * (v[ok] - c)))
        out[:, j] = np.bincount(k, weights=ph.real, minlength=K) + 1j * np.bincount(
            k, weights=ph.imag, minlength=K
        )
    return out


def _distances(Y, H, X):
    # Y (n, R), H (n, R, M), X (M, C) -> (n, C) squared distances
    HX = np.matmul(H, X)
    diff = Y[:, :, None] - HX
    return np.einsum("nrc,nrc->nc", diff.real, diff.real) + np.einsum(
        "nrc,nrc->nc", diff.imag, diff.imag
    )


def ml_search(Y, H, X):
    """Index of the candidate column of X minimising ||y - H x||^2, per row.

    Ties resolve to the lowest index.
    """
    Y = np.ascontiguousarray(Y, dtype=np.complex128)
    H = np.ascontiguousarray(H, dtype=np.complex128)
    X = np.ascontiguousarray(X, dtype=np.complex128)
    out = np.empty(Y.shape[0], dtype=np.int64)
    for s in range(0, Y.shape[0], _CHUNK):
        out[s:s + _CHUNK] = np.argmin(_distances(Y[s:s + _CHUNK], H[s:s + _CHUNK], X), axis=1)
    return out


def mi_terms(Y, H, X, idx, inv_sigma2):
    """log2 sum_c exp((||y - H x_idx||^2 - ||y - H x_c||^2) / sigma^2) per row."""
    Y = np.ascontiguousarray(Y, dtype=np.complex128)
    H = np.ascontiguousarray(H, dtype=np.complex128)
    X = np.ascontiguousarray(X, dtype=np.complex128)
    idx = np.asarray(idx, dtype=np.int64)
    out = np.empty(Y.shape[0], dtype=np.float64)
    for s in range(0, Y.shape[0], _CHUNK):
        dist = _distances(Y[s:s + _CHUNK], H[s:s + _CHUNK], X)
        ref = dist[np.arange(dist.shape[0]), idx[s:s + _CHUNK]]
        e = (ref[:, None] - dist) * inv_sigma2
        emax = e.max(axis=1)
        out[s:s + _CHUNK] = (emax + np.log(np.exp(e - emax[:, None]).sum(axis=1))) / np.log(2.0)
    return out
