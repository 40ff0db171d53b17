"""Pairwise hot loops, each with a numba and a pure-numpy implementation.

The numba path is used when numba imports and ``TRIOBS_DISABLE_NUMBA`` is
unset (or ``0``).  Both paths return identical results, including tie
breaking: the first pair in row-major (i, j) order wins.

Kernels
-------
pair_ratio_max(P, Z, V, min_sep)
    max over i < j with |P_i - P_j| >= min_sep of |V_i - V_j| / |Z_i - Z_j|.
mcshane_envelope(Zs, Vs, L, Q)
    upper min_k(V_k + L|Q - Z_k|) and lower max_k(V_k - L|Q - Z_k|) per
    output column.
consistency_excess(Z, V, L)
    max over pairs of |V_i - V_j| - L|Z_i - Z_j| (<= 0 means L-consistent).
modulus_bins(G, P, s)
    rho(s_k) = max |P_i - P_j| over pairs with |G_i - G_j| <= s_k.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("TRIOBS_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:  # pragma: no cover - exercised implicitly
    if _DISABLED:
        raise ImportError("disabled by TRIOBS_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    njit = None
    HAVE_NUMBA = False

_CHUNK = 512


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


def _as2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    return np.ascontiguousarray(a)


# --------------------------------------------------------------------------
# numpy implementations


def pair_ratio_max_numpy(P, Z, V, min_sep):
    P, Z, V = _as2d(P), _as2d(Z), _as2d(V)
    N = P.shape[0]
    best, bi, bj = 0.0, -1, -1
    idx = np.arange(N)
    for s in range(0, N, _CHUNK):
        e = min(N, s + _CHUNK)
        sep = np.sqrt(((P[s:e, None, :] - P[None, :, :]) ** 2).sum(-1))
        dz = np.sqrt(((Z[s:e, None, :] - Z[None, :, :]) ** 2).sum(-1))
        dv = np.sqrt(((V[s:e, None, :] - V[None, :, :]) ** 2).sum(-1))
        valid = (idx[None, :] > idx[s:e, None]) & (sep >= min_sep) & (dz > 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(valid, dv / np.where(dz > 0.0, dz, 1.0), -1.0)
        k = int(np.argmax(r))
        val = r.flat[k]
        if val >= 0.0 and (val > best or bi < 0):
            best = float(val)
            bi, bj = s + k // N, k % N
    return best, bi, bj


def mcshane_envelope_numpy(Zs, Vs, L, Q):
    Zs, Vs, Q = _as2d(Zs), _as2d(Vs), _as2d(Q)
    M, p = Q.shape[0], Vs.shape[1]
    up = np.empty((M, p))
    lo = np.empty((M, p))
    for s in range(0, M, _CHUNK):
        e = min(M, s + _CHUNK)
        d = np.sqrt(((Q[s:e, None, :] - Zs[None, :, :]) ** 2).sum(-1))
        for c in range(p):
            up[s:e, c] = (Vs[None, :, c] + L * d).min(axis=1)
            lo[s:e, c] = (Vs[None, :, c] - L * d).max(axis=1)
    return up, lo


def consistency_excess_numpy(Z, V, L):
    Z, V = _as2d(Z), _as2d(V)
    N = Z.shape[0]
    worst, wi, wj = -np.inf, -1, -1
    idx = np.arange(N)
    for s in range(0, N, _CHUNK):
        e = min(N, s + _CHUNK)
        dz = np.sqrt(((Z[s:e, None, :] - Z[None, :, :]) ** 2).sum(-1))
        dv = np.abs(V[s:e, None, :] - V[None, :, :]).max(-1)
        ex = np.where(idx[None, :] > idx[s:e, None], dv - L * dz, -np.inf)
        k = int(np.argmax(ex))
        if ex.flat[k] > worst:
            worst = float(ex.flat[k])
            wi, wj = s + k // N, k % N
    return worst, wi, wj


def modulus_bins_numpy(G, P, s):
    G, P = _as2d(G), _as2d(P)
    s = np.ascontiguousarray(s, dtype=np.float64)
    N, K = G.shape[0], s.shape[0]
    binmax = np.zeros(K)
    idx = np.arange(N)
    for a in range(0, N, _CHUNK):
        b = min(N, a + _CHUNK)
        dg = np.sqrt(((G[a:b, None, :] - G[None, :, :]) ** 2).sum(-1))
        dp = np.sqrt(((P[a:b, None, :] - P[None, :, :]) ** 2).sum(-1))
        mask = idx[None, :] > idx[a:b, None]
        dg, dp = dg[mask], dp[mask]
        k = np.searchsorted(s, dg, side="left")
        keep = k < K
        np.maximum.at(binmax, k[keep], dp[keep])
    return np.maximum.accumulate(binmax)


# --------------------------------------------------------------------------
# numba implementations

if HAVE_NUMBA:

    @njit(cache=True)
    def _nb_pair_ratio_max(P, Z, V, min_sep):
        N = P.shape[0]
        best, bi, bj = 0.0, -1, -1
        for i in range(N):
            for j in range(i + 1, N):
                sep = 0.0
                for c in range(P.shape[1]):
                    t = P[i, c] - P[j, c]
                    sep += t * t
                if np.sqrt(sep) < min_sep:
                    continue
                dz = 0.0
                for c in range(Z.shape[1]):
                    t = Z[i, c] - Z[j, c]
                    dz += t * t
                if dz <= 0.0:
                    continue
                dv = 0.0
                for c in range(V.shape[1]):
                    t = V[i, c] - V[j, c]
                    dv += t * t
                r = np.sqrt(dv) / np.sqrt(dz)
                if r > best or bi < 0:
                    best, bi, bj = r, i, j
        return best, bi, bj

    @njit(cache=True)
    def _nb_mcshane_envelope(Zs, Vs, L, Q):
        M, N, p = Q.shape[0], Zs.shape[0], Vs.shape[1]
        up = np.empty((M, p))
        lo = np.empty((M, p))
        for m in range(M):
            for c in range(p):
                up[m, c] = np.inf
                lo[m, c] = -np.inf
            for k in range(N):
                d = 0.0
                for c in range(Q.shape[1]):
                    t = Q[m, c] - Zs[k, c]
                    d += t * t
                d = L * np.sqrt(d)
                for c in range(p):
                    a = Vs[k, c] + d
                    if a < up[m, c]:
                        up[m, c] = a
                    b = Vs[k, c] - d
                    if b > lo[m, c]:
                        lo[m, c] = b
        return up, lo

    @njit(cache=True)
    def _nb_consistency_excess(Z, V, L):
        N = Z.shape[0]
        worst, wi, wj = -np.inf, -1, -1
        for i in range(N):
            for j in range(i + 1, N):
                dz = 0.0
                for c in range(Z.shape[1]):
                    t = Z[i, c] - Z[j, c]
                    dz += t * t
                dv = 0.0
                for c in range(V.shape[1]):
                    t = abs(V[i, c] - V[j, c])
                    if t > dv:
                        dv = t
                ex = dv - L * np.sqrt(dz)
                if ex > worst:
                    worst, wi, wj = ex, i, j
        return worst, wi, wj

    @njit(cache=True)
    def _nb_modulus_bins(G, P, s):
        N, K = G.shape[0], s.shape[0]
        binmax = np.zeros(K)
        for i in range(N):
            for j in range(i + 1, N):
                dg = 0.0
                for c in range(G.shape[1]):
                    t = G[i, c] - G[j, c]
                    dg += t * t
                dg = np.sqrt(dg)
                k = np.searchsorted(s, dg)
                if k >= K:
                    continue
                dp = 0.0
                for c in range(P.shape[1]):
                    t = P[i, c] - P[j, c]
                    dp += t * t
                dp = np.sqrt(dp)
                if dp > binmax[k]:
                    binmax[k] = dp
        for k in range(1, K):
            if binmax[k] < binmax[k - 1]:
                binmax[k] = binmax[k - 1]
        return binmax

    def pair_ratio_max_numba(P, Z, V, min_sep):
        best, i, j = _nb_pair_ratio_max(_as2d(P), _as2d(Z), _as2d(V), float(min_sep))
        return float(best), int(i), int(j)

    def mcshane_envelope_numba(Zs, Vs, L, Q):
        return _nb_mcshane_envelope(_as2d(Zs), _as2d(Vs), float(L), _as2d(Q))

    def consistency_excess_numba(Z, V, L):
        w, i, j = _nb_consistency_excess(_as2d(Z), _as2d(V), float(L))
        return float(w), int(i), int(j)

    def modulus_bins_numba(G, P, s):
        return _nb_modulus_bins(_as2d(G), _as2d(P), np.ascontiguousarray(s, dtype=np.float64))

    pair_ratio_max = pair_ratio_max_numba
    mcshane_envelope = mcshane_envelope_numba
    consistency_excess = consistency_excess_numba
    modulus_bins = modulus_bins_numba
else:  # pragma: no cover
    pair_ratio_max_numba = mcshane_envelope_numba = None
    consistency_excess_numba = modulus_bins_numba = None
    pair_ratio_max = pair_ratio_max_numpy
    mcshane_envelope = mcshane_envelope_numpy
    consistency_excess = consistency_excess_numpy
    modulus_bins = modulus_bins_numpy
