"""Pure-Python twins of the compiled kernels in ``_core.pyx``.

Same signatures, same algorithms. Sums use :func:`math.fsum`, so results can
differ from the compiled path in the last few bits.
"""
import math

import numpy as np


def zeta_transform(values, n_modes):
    out = np.array(values, dtype=np.float64, copy=True)
    view = out.reshape((2,) * n_modes) if n_modes else out
    for axis in range(n_modes):
        # bit k of the index is axis (n_modes - 1 - k) of the C-ordered view
        ax = n_modes - 1 - axis
        sl_hi = [slice(None)] * n_modes
        sl_lo = [slice(None)] * n_modes
        sl_hi[ax] = 1
        sl_lo[ax] = 0
        view[tuple(sl_hi)] += view[tuple(sl_lo)]
    return out


def mobius_transform(values, n_modes):
    out = np.array(values, dtype=np.float64, copy=True)
    view = out.reshape((2,) * n_modes) if n_modes else out
    for axis in range(n_modes):
        ax = n_modes - 1 - axis
        sl_hi = [slice(None)] * n_modes
        sl_lo = [slice(None)] * n_modes
        sl_hi[ax] = 1
        sl_lo[ax] = 0
        view[tuple(sl_hi)] -= view[tuple(sl_lo)]
    return out


def gibbs_moments(levels, n_modes):
    levels = np.asarray(levels, dtype=np.float64)
    emin = float(levels.min())
    w = np.exp(-(levels - emin))
    idx = np.arange(levels.size)
    bits = [(idx >> k) & 1 == 1 for k in range(n_modes)]
    occ = np.array([math.fsum(w[b]) for b in bits])
    pair = np.zeros((n_modes, n_modes))
    for a in range(n_modes):
        for b in range(a + 1, n_modes):
            pair[a, b] = pair[b, a] = math.fsum(w[bits[a] & bits[b]])
    return emin, math.fsum(w), occ, pair


def _free_sorted(eps):
    buf = np.ones(1)
    for e in eps:
        f = math.exp(-abs(e))
        # both halves are already descending; a stable sort merges them
        buf = np.sort(np.concatenate([buf, buf * f]), kind="stable")[::-1]
    return buf


def free_sorted_probabilities(eps):
    buf = _free_sorted(np.asarray(eps, dtype=np.float64))
    return buf / math.fsum(buf)


def free_fit_objective(eps, target, tail):
    eps = np.asarray(eps, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if target.size != 1 << eps.size:
        raise ValueError("target must have 2**n entries")
    buf = _free_sorted(eps)
    q = buf / math.fsum(buf)
    return 0.5 * (math.fsum(np.abs(target - q)) + tail)


def free_labeled_objective(eps, target):
    eps = np.asarray(eps, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if target.size != 1 << eps.size:
        raise ValueError("target must have 2**n entries")
    buf = np.ones(1)
    for e in eps:
        if e >= 0:
            p1 = math.exp(-e) / (1.0 + math.exp(-e))
            p0 = 1.0 / (1.0 + math.exp(-e))
        else:
            p1 = 1.0 / (1.0 + math.exp(e))
            p0 = math.exp(e) / (1.0 + math.exp(e))
        buf = np.concatenate([buf * p0, buf * p1])
    return 0.5 * math.fsum(np.abs(target - buf))


def _nelder_mead(x0, target, tail, max_evals, tol, labeled):
    n = x0.size
    nfev = 0

    def fun(x):
        nonlocal nfev
        nfev += 1
        if labeled:
            return free_labeled_objective(x, target)
        return free_fit_objective(x, target, tail)

    sim = np.tile(x0, (n + 1, 1))
    for i in range(n):
        sim[i + 1, i] = 1.05 * x0[i] if x0[i] != 0.0 else 0.00025
    fsim = np.array([fun(v) for v in sim])
    order = np.argsort(fsim, kind="stable")
    sim, fsim = sim[order], fsim[order]
    checkpoint = fsim[0]
    iters = 0
    converged = False

    while nfev < max_evals:
        xbar = sim[:-1].sum(axis=0) / n
        xr = 2.0 * xbar - sim[-1]
        fr = fun(xr)
        shrink = False
        if fr < fsim[0]:
            xe = 3.0 * xbar - 2.0 * sim[-1]
            fe = fun(xe)
            if fe < fr:
                sim[-1], fsim[-1] = xe, fe
            else:
                sim[-1], fsim[-1] = xr, fr
        elif fr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fr
        elif fr < fsim[-1]:
            xc = 1.5 * xbar - 0.5 * sim[-1]
            fc = fun(xc)
            if fc <= fr:
                sim[-1], fsim[-1] = xc, fc
            else:
                shrink = True
        else:
            xc = 0.5 * xbar + 0.5 * sim[-1]
            fc = fun(xc)
            if fc < fsim[-1]:
                sim[-1], fsim[-1] = xc, fc
            else:
                shrink = True
        if shrink:
            for i in range(1, n + 1):
                sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
                fsim[i] = fun(sim[i])
        order = np.argsort(fsim, kind="stable")
        sim, fsim = sim[order], fsim[order]
        iters += 1
        if iters % (n + 1) == 0:
            if checkpoint - fsim[0] < tol and fsim[-1] - fsim[0] < tol:
                converged = True
                break
            checkpoint = fsim[0]
    return sim[0].copy(), float(fsim[0]), nfev, converged


def nelder_mead_fit(target, tail, starts, max_evals, tol, labeled=False):
    starts = np.asarray(starts, dtype=np.float64)
    n_starts, n = starts.shape
    if n < 1 or n > 20:
        raise ValueError("number of modes must be in [1, 20]")
    target = np.asarray(target, dtype=np.float64)
    if target.size != 1 << n:
        raise ValueError("target must have 2**n entries")
    xs = np.empty((n_starts, n))
    fs = np.empty(n_starts)
    nf = np.empty(n_starts, dtype=np.int64)
    conv = np.empty(n_starts, dtype=bool)
    for r in range(n_starts):
        xs[r], fs[r], nf[r], conv[r] = _nelder_mead(
            starts[r].copy(), target, tail, max_evals, tol, labeled
        )
    return xs, fs, nf, conv
