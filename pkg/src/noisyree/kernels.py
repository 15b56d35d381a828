"""Hot loops: equilibrium residual/Jacobian, damped Newton, Kalman recursion.

Every function here takes plain arrays and scalars so it compiles under
numba; :mod:`noisyree._accel` decides whether it does. Unknown vector
layout for the equilibrium system is ``x = (p0, pD0, pD1, pI, L_upper)``
with the 15 upper-triangle entries of ``L`` in row-major order.
"""

from __future__ import annotations

import numpy as np

from ._accel import jit, jit_inline

N_COEF = 4
N_TRI = 15
N_UNKNOWN = N_COEF + N_TRI

_TRI_I = np.array([i for i in range(5) for j in range(i, 5)], dtype=np.int64)
_TRI_J = np.array([j for i in range(5) for j in range(i, 5)], dtype=np.int64)


@jit
def unpack_L(x, tri_i, tri_j):
    L = np.zeros((5, 5))
    for k in range(tri_i.shape[0]):
        a = tri_i[k]
        b = tri_j[k]
        L[a, b] = x[N_COEF + k]
        L[b, a] = x[N_COEF + k]
    return L


@jit
def equilibrium_blocks(coef, A, Bh, re, r):
    """``(Pbar, S, t, T, U, X)`` for a price row; ``t`` is ``Thalf``."""
    P = np.empty(5)
    P[:4] = coef
    P[4] = 1.0
    S = -re * P + P @ A
    S[1] += 1.0
    S[2] += 1.0
    t = P @ Bh
    T = t @ t
    U = Bh @ (T * np.eye(4) - np.outer(t, t)) @ Bh.T
    X = T * (A - 0.5 * r * np.eye(5)) - np.outer(Bh @ t, S)
    return P, S, t, T, U, X


@jit
def equilibrium_residual(x, A, Bh, re, r, phi, clear_mask, tri_i, tri_j):
    """Residual part of :func:`equilibrium_residual_jacobian` alone."""
    n_clear = 0
    for k in range(5):
        if clear_mask[k]:
            n_clear += 1
    F = np.zeros(N_TRI + n_clear)
    L = unpack_L(x, tri_i, tri_j)
    P, S, t, T, U, X = equilibrium_blocks(x[:N_COEF].copy(), A, Bh, re, r)
    if not T > 0.0:
        F[:] = np.inf
        return F
    R = L @ U @ L - L @ X - X.T @ L - np.outer(S, S)
    psi = -(t @ Bh.T @ L - S) / (r * phi * T)
    for k in range(N_TRI):
        F[k] = R[tri_i[k], tri_j[k]]
    row = N_TRI
    for c in range(5):
        if clear_mask[c]:
            tgt = 1.0 if (c == 0 or c == 4) else 0.0
            F[row] = psi[c] - tgt
            row += 1
    return F


@jit
def equilibrium_residual_jacobian(x, A, Bh, re, r, phi, clear_mask, tri_i, tri_j):
    """Stacked residual ``F`` and analytic Jacobian ``J`` at ``x``.

    Rows are the 15 upper-triangle Riccati entries followed by the demand
    components selected by ``clear_mask`` (target ``(1, 0, 0, 0, 1)``).
    """
    n_clear = 0
    for k in range(5):
        if clear_mask[k]:
            n_clear += 1
    m = N_TRI + n_clear
    F = np.zeros(m)
    J = np.zeros((m, N_UNKNOWN))

    coef = x[:N_COEF].copy()
    L = unpack_L(x, tri_i, tri_j)
    P, S, t, T, U, X = equilibrium_blocks(coef, A, Bh, re, r)
    if not T > 0.0:
        F[:] = np.inf
        return F, J

    R = L @ U @ L - L @ X - X.T @ L - np.outer(S, S)
    q = t @ Bh.T @ L - S
    den = r * phi * T
    psi = -q / den
    target = np.zeros(5)
    target[0] = 1.0
    target[4] = 1.0

    for k in range(N_TRI):
        F[k] = R[tri_i[k], tri_j[k]]
    row = N_TRI
    for c in range(5):
        if clear_mask[c]:
            F[row] = psi[c] - target[c]
            row += 1

    Bt = Bh @ t
    eye4 = np.eye(4)
    AmI = A - 0.5 * r * np.eye(5)
    for k in range(N_COEF):
        dP = np.zeros(5)
        dP[k] = 1.0
        dS = -re * dP + dP @ A
        dt = Bh[k, :].copy()
        dT = 2.0 * (t @ dt)
        dU = Bh @ (dT * eye4 - np.outer(dt, t) - np.outer(t, dt)) @ Bh.T
        dX = dT * AmI - np.outer(Bh @ dt, S) - np.outer(Bt, dS)
        dR = L @ dU @ L - L @ dX - dX.T @ L - np.outer(dS, S) - np.outer(S, dS)
        dq = dt @ Bh.T @ L - dS
        dpsi = -dq / den + q * dT / (den * T)
        for e in range(N_TRI):
            J[e, k] = dR[tri_i[e], tri_j[e]]
        row = N_TRI
        for c in range(5):
            if clear_mask[c]:
                J[row, k] = dpsi[c]
                row += 1

    UL = U @ L
    tB = t @ Bh.T
    for k in range(N_TRI):
        a = tri_i[k]
        b = tri_j[k]
        E = np.zeros((5, 5))
        E[a, b] = 1.0
        E[b, a] = 1.0
        EUL = E @ UL
        EX = E @ X
        dR = EUL + EUL.T - EX - EX.T
        dpsi = -(tB @ E) / den
        for e in range(N_TRI):
            J[e, N_COEF + k] = dR[tri_i[e], tri_j[e]]
        row = N_TRI
        for c in range(5):
            if clear_mask[c]:
                J[row, N_COEF + k] = dpsi[c]
                row += 1
    return F, J


@jit
def _max_abs(v):
    m = 0.0
    for i in range(v.shape[0]):
        a = abs(v[i])
        if not a <= m:
            m = a
    return m


@jit
def damped_newton(x0, A, Bh, re, r, phi, clear_mask, tri_i, tri_j, max_iter, tol, max_halvings):
    """Least-squares Newton with backtracking on the residual 2-norm.

    Returns ``(x, inf_norm, iterations, status)``; status 0 converged,
    1 iteration cap, 2 line search stalled, 3 non-finite.
    """
    x = x0.copy()
    F, J = equilibrium_residual_jacobian(x, A, Bh, re, r, phi, clear_mask, tri_i, tri_j)
    fnorm = np.sqrt(F @ F)
    if not np.isfinite(fnorm):
        return x, np.inf, 0, 3
    for it in range(max_iter):
        if _max_abs(F) <= tol:
            return x, _max_abs(F), it, 0
        step = np.linalg.lstsq(J, -F, -1.0)[0]
        alpha = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            xn = x + alpha * step
            Fn = equilibrium_residual(xn, A, Bh, re, r, phi, clear_mask, tri_i, tri_j)
            nn = np.sqrt(Fn @ Fn)
            if np.isfinite(nn) and nn < fnorm:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return x, _max_abs(F), it, 2
        x = xn
        F, J = equilibrium_residual_jacobian(x, A, Bh, re, r, phi, clear_mask, tri_i, tri_j)
        fnorm = nn
    fmax = _max_abs(F)
    return x, fmax, max_iter, 0 if fmax <= tol else 1


@jit_inline
def _lower_triangularize(A, nrows, ncols, kmax, row_norms, v):
    """Householder LQ in place on the first ``kmax`` rows: ``A <- A Q``.

    Afterwards ``A[:kmax]`` is lower triangular. Only the product ``A A'``
    matters to the callers, so ``Q`` is never formed. The norms of the
    leading rows before the transform go to ``row_norms``, used to judge
    when a diagonal entry is negligible; ``v`` is a work array of length
    at least ``ncols``.
    """
    for i in range(kmax):
        acc = 0.0
        for j in range(ncols):
            acc += A[i, j] * A[i, j]
        row_norms[i] = np.sqrt(acc)
    for i in range(kmax):
        sq = 0.0
        for j in range(i, ncols):
            sq += A[i, j] * A[i, j]
        norm = np.sqrt(sq)
        if norm == 0.0:
            continue
        alpha = -norm if A[i, i] >= 0.0 else norm
        v[i] = A[i, i] - alpha
        for j in range(i + 1, ncols):
            v[j] = A[i, j]
        vv = sq - A[i, i] * A[i, i] + v[i] * v[i]
        if vv == 0.0:
            continue
        two_over = 2.0 / vv
        for r in range(i + 1, nrows):
            dot = 0.0
            for j in range(i, ncols):
                dot += A[r, j] * v[j]
            scale = two_over * dot
            for j in range(i, ncols):
                A[r, j] -= scale * v[j]
        A[i, i] = alpha
        for j in range(i + 1, ncols):
            A[i, j] = 0.0


# once every predicted variance is below this level the large prior has
# been absorbed and the plain covariance recursion is accurate again
SQRT_PHASE_LEVEL = 100.0


@jit
def kalman_filter(F, Q, Qh, H, c, y, S0, keep_states):
    """Predict/update recursion from a zero-mean prior ``P0 = S0 S0'``.

    While the covariance still carries the large prior variance the filter
    propagates a factor ``S`` (``P = S S'``, ``Omega = Qh Qh'``) through
    orthogonal transforms, which loses nothing to cancellation. Once every
    predicted variance is below ``SQRT_PHASE_LEVEL`` it switches to the
    cheaper covariance recursion ``P <- P - K H P``.

    Returns ``(loglik_without_constant, means, covs, ok)`` where the
    returned log-likelihood is ``-0.5 * sum(log|f_t| + v_t' f_t^-1 v_t)``.
    ``ok`` is False when an innovation covariance is singular.
    Written with explicit loops: the matrices are tiny and BLAS calls
    would dominate.
    """
    n = F.shape[0]
    m = H.shape[0]
    q = Qh.shape[1]
    nobs = y.shape[0]
    means = np.zeros((nobs if keep_states else 0, n))
    covs = np.zeros((nobs if keep_states else 0, n, n))
    a = np.zeros(n)
    an = np.zeros(n)
    S = S0.copy()
    P = np.zeros((n, n))
    tmp = np.zeros((n, n))
    pre = np.zeros((n, n + q))
    arr = np.zeros((m + n, m + n))
    PHt = np.zeros((n, m))
    Lc = np.zeros((m, m))
    K = np.zeros((n, m))
    v = np.zeros(m)
    w = np.zeros(m)
    norms = np.zeros(n + m)
    hv = np.zeros(n + q + m)
    sqrt_phase = True
    ll = 0.0
    for s in range(nobs):
        for i in range(n):
            acc = 0.0
            for k in range(n):
                acc += F[i, k] * a[k]
            an[i] = acc
        for i in range(n):
            a[i] = an[i]
        for i in range(m):
            acc = y[s, i] - c[i]
            for k in range(n):
                acc -= H[i, k] * a[k]
            v[i] = acc

        if sqrt_phase:
            # predict through [F S, Qh]; update through
            # [[0, H S], [0, S]] -> [[f^1/2, 0], [P H' f^-T/2, S_new]]
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for k in range(n):
                        acc += F[i, k] * S[k, j]
                    pre[i, j] = acc
                for j in range(q):
                    pre[i, n + j] = Qh[i, j]
            _lower_triangularize(pre, n, n + q, n, norms, hv)
            predicted_max = 0.0
            for i in range(n):
                acc = 0.0
                for j in range(i + 1):
                    acc += pre[i, j] * pre[i, j]
                predicted_max = max(predicted_max, acc)
            for i in range(m + n):
                for j in range(m + n):
                    arr[i, j] = 0.0
            for i in range(m):
                for j in range(n):
                    acc = 0.0
                    for k in range(j, n):
                        acc += H[i, k] * pre[k, j]
                    arr[i, m + j] = acc
            for i in range(n):
                for j in range(i + 1):
                    arr[m + i, m + j] = pre[i, j]
            # only the innovation rows need triangular form; the lower block
            # is a valid factor of the updated covariance either way
            _lower_triangularize(arr, m + n, m + n, m, norms, hv)
            logdet = 0.0
            quad = 0.0
            for i in range(m):
                d = abs(arr[i, i])
                if not d > 1e-13 * norms[i]:
                    return -np.inf, means, covs, False
                logdet += 2.0 * np.log(d)
                acc = v[i]
                for k in range(i):
                    acc -= arr[i, k] * w[k]
                w[i] = acc / arr[i, i]
                quad += w[i] * w[i]
            for i in range(n):
                acc = 0.0
                for k in range(m):
                    acc += arr[m + i, k] * w[k]
                a[i] += acc
                for j in range(n):
                    S[i, j] = arr[m + i, m + j]
            for i in range(n):
                for j in range(i, n):
                    acc = 0.0
                    for k in range(n):
                        acc += S[i, k] * S[j, k]
                    P[i, j] = acc
                    P[j, i] = acc
            if predicted_max <= SQRT_PHASE_LEVEL:
                sqrt_phase = False
        else:
            # predict: P = F P F' + Omega
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for k in range(n):
                        acc += F[i, k] * P[k, j]
                    tmp[i, j] = acc
            for i in range(n):
                for j in range(i, n):
                    acc = Q[i, j]
                    for k in range(n):
                        acc += tmp[i, k] * F[j, k]
                    P[i, j] = acc
                    P[j, i] = acc
            for i in range(n):
                for j in range(m):
                    acc = 0.0
                    for k in range(n):
                        acc += P[i, k] * H[j, k]
                    PHt[i, j] = acc
            # Cholesky of f = H P H'; failure means f is not positive definite
            for i in range(m):
                for j in range(i + 1):
                    acc = 0.0
                    for k in range(n):
                        acc += H[i, k] * PHt[k, j]
                    for k in range(j):
                        acc -= Lc[i, k] * Lc[j, k]
                    if i == j:
                        if not acc > 0.0:
                            return -np.inf, means, covs, False
                        Lc[i, i] = np.sqrt(acc)
                    else:
                        Lc[i, j] = acc / Lc[j, j]
            logdet = 0.0
            quad = 0.0
            for i in range(m):
                logdet += 2.0 * np.log(Lc[i, i])
                acc = v[i]
                for k in range(i):
                    acc -= Lc[i, k] * w[k]
                w[i] = acc / Lc[i, i]
                quad += w[i] * w[i]
            # K = P H' f^-1 = (P H' Lc^-T) Lc^-1; a += K v = (P H' Lc^-T) w
            for r in range(n):
                for i in range(m):
                    acc = PHt[r, i]
                    for k in range(i):
                        acc -= Lc[i, k] * K[r, k]
                    K[r, i] = acc / Lc[i, i]
            for i in range(n):
                acc = 0.0
                for k in range(m):
                    acc += K[i, k] * w[k]
                a[i] += acc
            # P <- P - (P H' Lc^-T)(P H' Lc^-T)'
            for i in range(n):
                for j in range(i, n):
                    acc = P[i, j]
                    for k in range(m):
                        acc -= K[i, k] * K[j, k]
                    P[i, j] = acc
                    P[j, i] = acc
        ll -= 0.5 * (logdet + quad)
        if keep_states:
            for i in range(n):
                means[s, i] = a[i]
                for j in range(n):
                    covs[s, i, j] = P[i, j]
    return ll, means, covs, True


def tri_indices():
    return _TRI_I, _TRI_J
