"""Loop-level kernels compiled with numba.

Every function here has a vectorized twin in ``_np`` with the same signature
and return convention.
"""
import math

import numpy as np
from numba import njit

LOG2 = math.log(2.0)


@njit(cache=True)
def _jacobi_inplace(a, v, with_vectors, tol_rel, max_sweeps):
    """Cyclic Jacobi on one Hermitian matrix, in place.

    On return the diagonal of ``a`` holds the eigenvalues and, if requested,
    the columns of ``v`` the eigenvectors. Returns the number of sweeps used,
    or -1 when ``max_sweeps`` was exhausted.
    """
    n = a.shape[0]
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += a[i, j].real ** 2 + a[i, j].imag ** 2
    thresh = tol_rel * math.sqrt(fro)
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * (a[p, q].real ** 2 + a[p, q].imag ** 2)
        if math.sqrt(off) <= thresh:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                g = a[p, q]
                ag = abs(g)
                if ag == 0.0:
                    continue
                ph = g / ag
                phc = ph.conjugate()
                app = a[p, p].real
                aqq = a[q, q].real
                tau = (aqq - app) / (2.0 * ag)
                t = 1.0 / (abs(tau) + math.sqrt(1.0 + tau * tau))
                if tau < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * phc * akq
                    a[k, q] = s * akp + c * phc * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * ph * aqk
                    a[q, k] = s * apk + c * ph * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = app - t * ag
                a[q, q] = aqq + t * ag
                if with_vectors:
                    for k in range(n):
                        vkp = v[k, p]
                        vkq = v[k, q]
                        v[k, p] = c * vkp - s * phc * vkq
                        v[k, q] = s * vkp + c * phc * vkq
    return -1


@njit(cache=True)
def eigh_batch(mats, with_vectors, tol_rel, max_sweeps):
    """Unsorted eigenpairs of a stack of Hermitian matrices.

    Returns ``(w, v, sweeps, offnorm)``; ``sweeps[b] == -1`` flags
    non-convergence and ``offnorm[b]`` is the residual off-diagonal norm.
    """
    nb, n, _ = mats.shape
    w = np.empty((nb, n))
    v = np.zeros((nb, n, n), dtype=np.complex128)
    sweeps = np.empty(nb, dtype=np.int64)
    offnorm = np.empty(nb)
    a = np.empty((n, n), dtype=np.complex128)
    for b in range(nb):
        for i in range(n):
            for j in range(n):
                a[i, j] = 0.5 * (mats[b, i, j] + mats[b, j, i].conjugate())
        if with_vectors:
            for i in range(n):
                v[b, i, i] = 1.0
        sweeps[b] = _jacobi_inplace(a, v[b], with_vectors, tol_rel, max_sweeps)
        off = 0.0
        for i in range(n):
            w[b, i] = a[i, i].real
            for j in range(n):
                if i != j:
                    off += a[i, j].real ** 2 + a[i, j].imag ** 2
        offnorm[b] = math.sqrt(off)
    return w, v, sweeps, offnorm


@njit(cache=True)
def _eigvals_small(m, work, out):
    """Eigenvalues of a small Hermitian matrix into ``out``."""
    n = m.shape[0]
    if n == 1:
        out[0] = m[0, 0].real
        return True
    if n == 2:
        a = m[0, 0].real
        d = m[1, 1].real
        b = m[0, 1]
        mid = 0.5 * (a + d)
        r = math.sqrt((0.5 * (a - d)) ** 2 + b.real ** 2 + b.imag ** 2)
        out[0] = mid - r
        out[1] = mid + r
        return True
    for i in range(n):
        for j in range(n):
            work[i, j] = 0.5 * (m[i, j] + m[j, i].conjugate())
    status = _jacobi_inplace(work, work, False, 1e-12, 100)
    for i in range(n):
        out[i] = work[i, i].real
    return status >= 0


@njit(cache=True)
def _neg_xlogx_sum(vals):
    acc = 0.0
    for k in range(vals.shape[0]):
        lam = vals[k]
        if lam > 0.0:
            acc -= lam * math.log(lam)
    return acc / LOG2


@njit(cache=True)
def _cond_entropy(rho, rho_b, theta, phi, sig, work, ev):
    """Outcome-weighted conditional entropy of B after measuring A along (theta, phi)."""
    db = rho_b.shape[0]
    ca = math.cos(0.5 * theta)
    sa = math.sin(0.5 * theta)
    beta = complex(math.cos(phi), math.sin(phi)) * sa
    # sigma_+ = sum_ab conj(n_a) n_b rho_ab with n = (ca, beta)
    w00 = ca * ca
    w01 = ca * beta
    w10 = beta.conjugate() * ca
    w11 = sa * sa
    total = 0.0
    for i in range(db):
        for j in range(db):
            sig[i, j] = (
                w00 * rho[i, j]
                + w01 * rho[i, db + j]
                + w10 * rho[db + i, j]
                + w11 * rho[db + i, db + j]
            )
    for branch in range(2):
        if branch == 1:
            for i in range(db):
                for j in range(db):
                    sig[i, j] = rho_b[i, j] - sig[i, j]
        p = 0.0
        for i in range(db):
            p += sig[i, i].real
        if p < 1e-12:
            continue
        _eigvals_small(sig, work, ev)
        total += _neg_xlogx_sum(ev) + p * math.log(p) / LOG2
    return total


@njit(cache=True)
def _nelder_mead_2d(rho, rho_b, x0, y0, f0, step, iters, sig, work, ev):
    xs = np.empty(3)
    ys = np.empty(3)
    fs = np.empty(3)
    xs[0] = x0
    ys[0] = y0
    fs[0] = f0
    xs[1] = x0 + step
    ys[1] = y0
    fs[1] = _cond_entropy(rho, rho_b, xs[1], ys[1], sig, work, ev)
    xs[2] = x0
    ys[2] = y0 + step
    fs[2] = _cond_entropy(rho, rho_b, xs[2], ys[2], sig, work, ev)
    for _ in range(iters):
        # insertion sort by f, stable
        for i in range(1, 3):
            j = i
            while j > 0 and fs[j] < fs[j - 1]:
                fs[j], fs[j - 1] = fs[j - 1], fs[j]
                xs[j], xs[j - 1] = xs[j - 1], xs[j]
                ys[j], ys[j - 1] = ys[j - 1], ys[j]
                j -= 1
        size = max(abs(xs[1] - xs[0]), abs(xs[2] - xs[0]), abs(ys[1] - ys[0]), abs(ys[2] - ys[0]))
        if fs[2] - fs[0] <= 1e-15 and size <= 1e-10:
            break
        xo = 0.5 * (xs[0] + xs[1])
        yo = 0.5 * (ys[0] + ys[1])
        xr = 2.0 * xo - xs[2]
        yr = 2.0 * yo - ys[2]
        fr = _cond_entropy(rho, rho_b, xr, yr, sig, work, ev)
        shrink = False
        if fr < fs[0]:
            xe = xo + 2.0 * (xr - xo)
            ye = yo + 2.0 * (yr - yo)
            fe = _cond_entropy(rho, rho_b, xe, ye, sig, work, ev)
            if fe < fr:
                xs[2], ys[2], fs[2] = xe, ye, fe
            else:
                xs[2], ys[2], fs[2] = xr, yr, fr
        elif fr < fs[1]:
            xs[2], ys[2], fs[2] = xr, yr, fr
        elif fr < fs[2]:
            xc = xo + 0.5 * (xr - xo)
            yc = yo + 0.5 * (yr - yo)
            fc = _cond_entropy(rho, rho_b, xc, yc, sig, work, ev)
            if fc <= fr:
                xs[2], ys[2], fs[2] = xc, yc, fc
            else:
                shrink = True
        else:
            xc = xo + 0.5 * (xs[2] - xo)
            yc = yo + 0.5 * (ys[2] - yo)
            fc = _cond_entropy(rho, rho_b, xc, yc, sig, work, ev)
            if fc < fs[2]:
                xs[2], ys[2], fs[2] = xc, yc, fc
            else:
                shrink = True
        if shrink:
            for i in range(1, 3):
                xs[i] = xs[0] + 0.5 * (xs[i] - xs[0])
                ys[i] = ys[0] + 0.5 * (ys[i] - ys[0])
                fs[i] = _cond_entropy(rho, rho_b, xs[i], ys[i], sig, work, ev)
    best = fs[0]
    for i in range(1, 3):
        if fs[i] < best:
            best = fs[i]
    return best


@njit(cache=True)
def discord_batch(rhos, thetas, phis, refine, refine_iters, step):
    """Unclamped discord D(A|B) of each state, A being the leading qubit.

    Returns ``(discord, ok)`` where ``ok`` is False if an inner eigensolve
    failed to converge.
    """
    nb, d, _ = rhos.shape
    db = d // 2
    out = np.empty(nb)
    ok = np.ones(nb, dtype=np.bool_)
    full = np.empty((d, d), dtype=np.complex128)
    ev_full = np.empty(d)
    rho_a = np.empty((2, 2), dtype=np.complex128)
    ev_a = np.empty(2)
    rho_b = np.empty((db, db), dtype=np.complex128)
    sig = np.empty((db, db), dtype=np.complex128)
    work = np.empty((db, db), dtype=np.complex128)
    ev = np.empty(db)
    ngrid = thetas.shape[0]
    for b in range(nb):
        rho = rhos[b]
        for i in range(d):
            for j in range(d):
                full[i, j] = 0.5 * (rho[i, j] + rho[j, i].conjugate())
        if _jacobi_inplace(full, full, False, 1e-12, 100) < 0:
            ok[b] = False
        for i in range(d):
            ev_full[i] = full[i, i].real
        s_ab = _neg_xlogx_sum(ev_full)
        for a1 in range(2):
            for a2 in range(2):
                acc = 0.0j
                for k in range(db):
                    acc += rho[a1 * db + k, a2 * db + k]
                rho_a[a1, a2] = acc
        _eigvals_small(rho_a, rho_a, ev_a)
        s_a = _neg_xlogx_sum(ev_a)
        for i in range(db):
            for j in range(db):
                rho_b[i, j] = rho[i, j] + rho[db + i, db + j]
        best = 1e300
        bt = 0.0
        bp = 0.0
        for g in range(ngrid):
            val = _cond_entropy(rho, rho_b, thetas[g], phis[g], sig, work, ev)
            if val < best:
                best = val
                bt = thetas[g]
                bp = phis[g]
        if refine:
            best = _nelder_mead_2d(rho, rho_b, bt, bp, best, step, refine_iters, sig, work, ev)
        out[b] = s_a - s_ab + best
    return out, ok


@njit(cache=True)
def mf_gradients(theta, x, rows, cols, vals, lam):
    """Objective and gradients over the known cells listed in COO form."""
    ns, f = theta.shape
    nu = x.shape[0]
    gt = np.empty_like(theta)
    gx = np.empty_like(x)
    reg = 0.0
    for i in range(ns):
        for l in range(f):
            gt[i, l] = lam * theta[i, l]
            reg += theta[i, l] * theta[i, l]
    for j in range(nu):
        for l in range(f):
            gx[j, l] = lam * x[j, l]
            reg += x[j, l] * x[j, l]
    sq = 0.0
    for k in range(rows.shape[0]):
        i = rows[k]
        j = cols[k]
        r = 0.0
        for l in range(f):
            r += theta[i, l] * x[j, l]
        r -= vals[k]
        sq += r * r
        for l in range(f):
            gt[i, l] += r * x[j, l]
            gx[j, l] += r * theta[i, l]
    return 0.5 * sq + 0.5 * lam * reg, gt, gx
