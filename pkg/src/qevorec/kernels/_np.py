"""Vectorized numpy kernels, the fallback for ``_nb``.

The eigensolver is the same cyclic Jacobi method, but rotations run in
round-robin order so that n/2 disjoint pairs are annihilated per numpy call,
and every call is vectorized over the leading batch axis.
"""
from functools import lru_cache

import numpy as np

LOG2 = np.log(2.0)


@lru_cache(maxsize=None)
def _round_robin(n):
    """Rounds of disjoint (p, q) pairs covering every pair once."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                pairs.append((min(a, b), max(a, b)))
        if pairs:
            pq = np.array(pairs, dtype=np.intp)
            rounds.append((pq[:, 0].copy(), pq[:, 1].copy()))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _offnorm(a):
    n = a.shape[-1]
    mask = ~np.eye(n, dtype=bool)
    return np.sqrt(np.sum(np.abs(a[..., mask]) ** 2, axis=-1))


def eigh_batch(mats, with_vectors, tol_rel, max_sweeps):
    mats = np.asarray(mats, dtype=np.complex128)
    nb, n, _ = mats.shape
    a = 0.5 * (mats + np.conj(np.swapaxes(mats, -1, -2)))
    v = np.broadcast_to(np.eye(n, dtype=np.complex128), (nb, n, n)).copy() if with_vectors else None
    thresh = tol_rel * np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))
    sweeps = np.full(nb, -1, dtype=np.int64)
    active = np.ones(nb, dtype=bool)
    rounds = _round_robin(n)
    for sweep in range(max_sweeps + 1):
        done = active & (_offnorm(a) <= thresh)
        sweeps[done] = sweep
        active &= ~done
        if not active.any() or sweep == max_sweeps:
            break
        idx = np.nonzero(active)[0]
        sub = a[idx]
        subv = v[idx] if with_vectors else None
        for p, q in rounds:
            g = sub[:, p, q]
            ag = np.abs(g)
            nz = ag > 0.0
            safe = np.where(nz, ag, 1.0)
            ph = np.where(nz, g / safe, 1.0)
            app = sub[:, p, p].real
            aqq = sub[:, q, q].real
            tau = (aqq - app) / (2.0 * safe)
            t = 1.0 / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            t = np.where(tau < 0.0, -t, t)
            t = np.where(nz, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            phc = np.conj(ph)
            cc = c[:, None, :]
            sp = (s * phc)[:, None, :]
            sq_ = (c * phc)[:, None, :]
            colp = sub[:, :, p]
            colq = sub[:, :, q]
            sub[:, :, p] = cc * colp - sp * colq
            sub[:, :, q] = s[:, None, :] * colp + sq_ * colq
            rowp = sub[:, p, :]
            rowq = sub[:, q, :]
            sub[:, p, :] = c[:, :, None] * rowp - (s * ph)[:, :, None] * rowq
            sub[:, q, :] = s[:, :, None] * rowp + (c * ph)[:, :, None] * rowq
            sub[:, p, q] = 0.0
            sub[:, q, p] = 0.0
            sub[:, p, p] = app - t * ag
            sub[:, q, q] = aqq + t * ag
            if with_vectors:
                vp = subv[:, :, p]
                vq = subv[:, :, q]
                subv[:, :, p] = cc * vp - sp * vq
                subv[:, :, q] = s[:, None, :] * vp + sq_ * vq
        a[idx] = sub
        if with_vectors:
            v[idx] = subv
    w = np.real(np.diagonal(a, axis1=-2, axis2=-1)).copy()
    if not with_vectors:
        v = np.zeros((nb, n, n), dtype=np.complex128)
    return w, v, sweeps, _offnorm(a)


def _eigvals_small(m):
    """Eigenvalues of a stack of small Hermitian matrices (last two axes)."""
    n = m.shape[-1]
    if n == 1:
        return m[..., 0, 0].real[..., None]
    if n == 2:
        a = m[..., 0, 0].real
        d = m[..., 1, 1].real
        b = m[..., 0, 1]
        mid = 0.5 * (a + d)
        r = np.sqrt((0.5 * (a - d)) ** 2 + np.abs(b) ** 2)
        return np.stack([mid - r, mid + r], axis=-1)
    lead = m.shape[:-2]
    w, _, _, _ = eigh_batch(m.reshape(-1, n, n), False, 1e-12, 100)
    return w.reshape(lead + (n,))


def _neg_xlogx_sum(vals):
    pos = vals > 0.0
    safe = np.where(pos, vals, 1.0)
    return -np.sum(np.where(pos, vals * np.log(safe), 0.0), axis=-1) / LOG2


def _cond_entropy(blocks, rho_b, theta, phi):
    """Conditional entropy for per-state points ``theta``/``phi`` of shape (N, K)."""
    ca = np.cos(0.5 * theta)
    sa = np.sin(0.5 * theta)
    beta = np.exp(1j * phi) * sa
    w00 = (ca * ca)[..., None, None]
    w01 = (ca * beta)[..., None, None]
    w10 = (np.conj(beta) * ca)[..., None, None]
    w11 = (sa * sa)[..., None, None]
    r00, r01, r10, r11 = (blk[:, None] for blk in blocks)
    sig_p = w00 * r00 + w01 * r01 + w10 * r10 + w11 * r11
    sig_m = rho_b[:, None] - sig_p
    total = np.zeros(theta.shape)
    for sig in (sig_p, sig_m):
        p = np.real(np.trace(sig, axis1=-2, axis2=-1))
        ev = _eigvals_small(sig)
        safe = np.where(p >= 1e-12, p, 1.0)
        term = _neg_xlogx_sum(ev) + safe * np.log(safe) / LOG2
        total += np.where(p >= 1e-12, term, 0.0)
    return total


def _nelder_mead_2d(f, x0, y0, f0, step, iters):
    """Batched Nelder-Mead; ``f`` maps (N, K) point arrays to (N, K) values."""
    nb = x0.shape[0]
    xs = np.stack([x0, x0 + step, x0], axis=1)
    ys = np.stack([y0, y0, y0 + step], axis=1)
    fs = np.empty((nb, 3))
    fs[:, 0] = f0
    fs[:, 1:] = f(xs[:, 1:], ys[:, 1:])
    active = np.ones(nb, dtype=bool)
    rows = np.arange(nb)
    for _ in range(iters):
        order = np.argsort(fs, axis=1, kind="stable")
        xs = np.take_along_axis(xs, order, axis=1)
        ys = np.take_along_axis(ys, order, axis=1)
        fs = np.take_along_axis(fs, order, axis=1)
        size = np.max(np.abs(np.concatenate([xs[:, 1:] - xs[:, :1], ys[:, 1:] - ys[:, :1]], axis=1)), axis=1)
        active &= ~((fs[:, 2] - fs[:, 0] <= 1e-15) & (size <= 1e-10))
        if not active.any():
            break
        xo = 0.5 * (xs[:, 0] + xs[:, 1])
        yo = 0.5 * (ys[:, 0] + ys[:, 1])
        xr = 2.0 * xo - xs[:, 2]
        yr = 2.0 * yo - ys[:, 2]
        xe = xo + 2.0 * (xr - xo)
        ye = yo + 2.0 * (yr - yo)
        xoc = xo + 0.5 * (xr - xo)
        yoc = yo + 0.5 * (yr - yo)
        xic = xo + 0.5 * (xs[:, 2] - xo)
        yic = yo + 0.5 * (ys[:, 2] - yo)
        vals = f(np.stack([xr, xe, xoc, xic], axis=1), np.stack([yr, ye, yoc, yic], axis=1))
        fr, fe, foc, fic = vals.T
        f0_, f1_, f2_ = fs.T
        expand = fr < f0_
        reflect = ~expand & (fr < f1_)
        outside = ~expand & ~reflect & (fr < f2_)
        inside = ~expand & ~reflect & ~outside
        new_x = xs[:, 2].copy()
        new_y = ys[:, 2].copy()
        new_f = f2_.copy()
        use_e = expand & (fe < fr)
        use_r = (expand & ~use_e) | reflect
        use_oc = outside & (foc <= fr)
        use_ic = inside & (fic < f2_)
        shrink = (outside & ~use_oc) | (inside & ~use_ic)
        for sel, nx, ny, nf in ((use_e, xe, ye, fe), (use_r, xr, yr, fr), (use_oc, xoc, yoc, foc), (use_ic, xic, yic, fic)):
            new_x = np.where(sel, nx, new_x)
            new_y = np.where(sel, ny, new_y)
            new_f = np.where(sel, nf, new_f)
        upd = active & ~shrink
        xs[upd, 2] = new_x[upd]
        ys[upd, 2] = new_y[upd]
        fs[upd, 2] = new_f[upd]
        sh = rows[active & shrink]
        if sh.size:
            sx = xs[sh, :1] + 0.5 * (xs[sh, 1:] - xs[sh, :1])
            sy = ys[sh, :1] + 0.5 * (ys[sh, 1:] - ys[sh, :1])
            xs[sh, 1:] = sx
            ys[sh, 1:] = sy
            fs[sh, 1:] = f(sx, sy, sh)
    return np.min(fs, axis=1)


def discord_batch(rhos, thetas, phis, refine, refine_iters, step):
    rhos = np.asarray(rhos, dtype=np.complex128)
    nb, d, _ = rhos.shape
    db = d // 2
    w_full, _, sweeps, _ = eigh_batch(rhos, False, 1e-12, 100)
    s_ab = _neg_xlogx_sum(w_full)
    blocks = (rhos[:, :db, :db], rhos[:, :db, db:], rhos[:, db:, :db], rhos[:, db:, db:])
    rho_a = np.empty((nb, 2, 2), dtype=np.complex128)
    for a1 in range(2):
        for a2 in range(2):
            rho_a[:, a1, a2] = np.trace(blocks[2 * a1 + a2], axis1=-2, axis2=-1)
    s_a = _neg_xlogx_sum(_eigvals_small(rho_a))
    rho_b = blocks[0] + blocks[3]
    grid = _cond_entropy(blocks, rho_b, np.broadcast_to(thetas, (nb, thetas.size)), np.broadcast_to(phis, (nb, phis.size)))
    g = np.argmin(grid, axis=1)
    best = grid[np.arange(nb), g]
    if refine:

        def f(tx, ty, sel=None):
            if sel is None:
                return _cond_entropy(blocks, rho_b, tx, ty)
            sub = tuple(blk[sel] for blk in blocks)
            return _cond_entropy(sub, rho_b[sel], tx, ty)

        best = _nelder_mead_2d(f, thetas[g].astype(float), phis[g].astype(float), best, step, refine_iters)
    return s_a - s_ab + best, sweeps >= 0


def mf_gradients(theta, x, rows, cols, vals, lam):
    ns, nu = theta.shape[0], x.shape[0]
    resid = np.zeros((ns, nu))
    resid[rows, cols] = np.einsum("kl,kl->k", theta[rows], x[cols]) - vals
    gt = resid @ x + lam * theta
    gx = resid.T @ theta + lam * x
    obj = 0.5 * np.dot(resid[rows, cols], resid[rows, cols]) + 0.5 * lam * (np.sum(theta * theta) + np.sum(x * x))
    return obj, gt, gx
