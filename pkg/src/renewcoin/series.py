"""Truncated power-series arithmetic on coefficient arrays.

The renewal recursions are semi-online convolutions: the n-th unknown
coefficient depends on all earlier ones.  They are solved here by a
divide-and-conquer scheme (known prefix convolved into the pending suffix
with FFTs, small diagonal blocks solved by a fixed triangular Toeplitz
matrix), which costs O(H log^2 H) instead of O(H^2).
"""

import numpy as np
from scipy import fft as sfft
from scipy.linalg import toeplitz

_BLOCK = 64
_DIRECT_CONV = 128
_DIRECT_WORK = 2**24  # direct products below this many multiply-adds
_POWERS_BUDGET = 2**25  # floats held in the baby-step table


def convolve(a, b, n=None):
    """Return the first `n` coefficients of the product a*b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    full = len(a) + len(b) - 1
    n = full if n is None else n
    if n <= 0 or len(a) == 0 or len(b) == 0:
        return np.zeros(max(n, 0))
    a = a[:n]
    b = b[:n]
    # Direct sums keep relative accuracy on small coefficients; FFT error is
    # absolute, relative to the largest inputs.
    if min(len(a), len(b)) <= _DIRECT_CONV or len(a) * len(b) <= _DIRECT_WORK:
        out = np.convolve(a, b)
    else:
        size = sfft.next_fast_len(len(a) + len(b) - 1, real=True)
        out = sfft.irfft(sfft.rfft(a, size) * sfft.rfft(b, size), size)
    res = np.zeros(n)
    m = min(n, len(out))
    res[:m] = out[:m]
    return res


def _solve_online(b, g, sign, H):
    """Solve y_n = b_n + sign * sum_{j<n} y_j g_{n-j} for n = 0..H.

    `g[0]` is ignored.  Returns y as a float array of length H+1.
    """
    g_in = np.asarray(g, dtype=float)[: H + 1]
    g = np.zeros(H + 1)
    g[: len(g_in)] = g_in
    g[0] = 0.0
    acc = np.zeros(H + 1)
    acc[: min(len(b), H + 1)] = b[: H + 1]
    y = np.zeros(H + 1)

    # Coefficients of 1/(1 - sign*G) give the inverse of the diagonal block.
    B = min(_BLOCK, H + 1)
    m = np.zeros(B)
    m[0] = 1.0
    for n in range(1, B):
        m[n] = sign * np.dot(g[1 : n + 1], m[n - 1 :: -1])
    inv_block = toeplitz(m, np.zeros(B))

    def solve(lo, hi):
        if hi - lo <= B:
            y[lo:hi] = inv_block[: hi - lo, : hi - lo] @ acc[lo:hi]
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        contrib = convolve(y[lo:mid], g[: hi - lo], hi - lo)
        acc[mid:hi] += sign * contrib[mid - lo :]
        solve(mid, hi)

    solve(0, H + 1)
    return y


def renewal_u_from_f(f, H):
    """Renewal sequence u_0..u_H of the inter-arrival pmf f (f[0] = 0).

    Solves u_n = [n == 0] + sum_{k=1}^{n} f_k u_{n-k}.
    """
    b = np.zeros(1)
    b[0] = 1.0
    return _solve_online(b, f, 1.0, H)


def renewal_f_from_u(u):
    """Inter-arrival coefficients f_0..f_H (f_0 = 0) from u with u_0 = 1.

    Solves f_n = u_n - sum_{k=1}^{n-1} f_k u_{n-k}; no sign check here.
    """
    u = np.asarray(u, dtype=float)
    H = len(u) - 1
    b = u.copy()
    b[0] = 0.0
    return _solve_online(b, u, -1.0, H)


def valuation(a, tol=0.0):
    """Index of the first coefficient whose magnitude exceeds `tol`."""
    nz = np.flatnonzero(np.abs(np.asarray(a)) > tol)
    return int(nz[0]) if len(nz) else len(a)


def compose(outer, inner, H):
    """Coefficients 0..H of outer(inner(s)) for inner with inner[0] = 0.

    Baby-step giant-step (Brent-Kung) evaluation: the powers
    inner^0..inner^(k-1) are tabulated once, the coefficients of `outer`
    are cut into chunks of length k evaluated by one matrix product, and
    the chunks are recombined by Horner's rule in G = inner^k.
    """
    outer = np.asarray(outer, dtype=float)
    inner = np.zeros(H + 1) if len(inner) == 0 else np.asarray(inner, dtype=float)
    inner = np.concatenate([inner, np.zeros(max(0, H + 1 - len(inner)))])[: H + 1]
    if inner[0] != 0.0:
        raise ValueError("inner series must have zero constant term")
    v = max(1, valuation(inner))
    # inner^j has valuation >= j*v, so only degrees <= H/v of outer matter.
    deg = min(len(outer) - 1, H // v)
    outer = outer[: deg + 1]
    if deg <= 0:
        res = np.zeros(H + 1)
        res[0] = outer[0] if len(outer) else 0.0
        return res

    k = max(1, int(np.ceil(np.sqrt(deg + 1))))
    k = min(k, max(8, _POWERS_BUDGET // (H + 1)))
    powers = np.zeros((k, H + 1))
    powers[0, 0] = 1.0
    for j in range(1, k):
        powers[j] = convolve(powers[j - 1], inner, H + 1)
    giant = convolve(powers[k - 1], inner, H + 1)

    nchunks = (deg + k) // k
    coeffs = np.zeros((nchunks, k))
    flat = coeffs.reshape(-1)
    flat[: deg + 1] = outer

    res = np.zeros(H + 1)
    # Horner over chunks from the top; rows computed lazily to bound memory.
    for i in range(nchunks - 1, -1, -1):
        chunk = coeffs[i] @ powers
        res = convolve(res, giant, H + 1) + chunk
    return res
