# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.

Every function here has a pure-Python twin in ``_fallback`` with the same
signature and the same arithmetic order, up to summation rounding.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs
from libc.stdlib cimport free, malloc

cnp.import_array()


cdef inline void _nadd(double* s, double* c, double x) noexcept nogil:
    # Neumaier compensated accumulation
    cdef double t = s[0] + x
    if fabs(s[0]) >= fabs(x):
        c[0] += (s[0] - t) + x
    else:
        c[0] += (x - t) + s[0]
    s[0] = t


def zeta_transform(const double[::1] values, int n_modes):
    """out[m] = sum of values[s] over all submasks s of m."""
    out = np.array(values, dtype=np.float64, copy=True)
    cdef double[::1] v = out
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n_modes
    cdef Py_ssize_t m, step
    cdef int bit
    with nogil:
        for bit in range(n_modes):
            step = (<Py_ssize_t>1) << bit
            for m in range(size):
                if m & step:
                    v[m] += v[m ^ step]
    return out


def mobius_transform(const double[::1] values, int n_modes):
    """Inverse of :func:`zeta_transform`."""
    out = np.array(values, dtype=np.float64, copy=True)
    cdef double[::1] v = out
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n_modes
    cdef Py_ssize_t m, step
    cdef int bit
    with nogil:
        for bit in range(n_modes):
            step = (<Py_ssize_t>1) << bit
            for m in range(size):
                if m & step:
                    v[m] -= v[m ^ step]
    return out


def gibbs_moments(const double[::1] levels, int n_modes):
    """Shifted Boltzmann sums over a complete bitmask-ordered spectrum.

    Returns ``(emin, total, occ, pair)`` where weights are
    ``exp(-(E - emin))``, ``total`` is their sum, ``occ[k]`` the summed
    weight of levels with bit k set and ``pair[k, l]`` (k < l, mirrored)
    the summed weight with both bits set. All sums are compensated.
    """
    cdef Py_ssize_t size = levels.shape[0]
    cdef int n = n_modes
    cdef Py_ssize_t m
    cdef int a, b, nb
    cdef double emin = levels[0]
    cdef double w
    for m in range(size):
        if levels[m] < emin:
            emin = levels[m]

    occ_s = np.zeros(n, dtype=np.float64)
    occ_c = np.zeros(n, dtype=np.float64)
    pair_s = np.zeros((n, n), dtype=np.float64)
    pair_c = np.zeros((n, n), dtype=np.float64)
    cdef double[::1] os_ = occ_s
    cdef double[::1] oc_ = occ_c
    cdef double[:, ::1] ps_ = pair_s
    cdef double[:, ::1] pc_ = pair_c
    cdef double tot_s = 0.0
    cdef double tot_c = 0.0
    cdef int bits[64]

    with nogil:
        for m in range(size):
            w = exp(-(levels[m] - emin))
            _nadd(&tot_s, &tot_c, w)
            nb = 0
            for a in range(n):
                if (m >> a) & 1:
                    bits[nb] = a
                    nb += 1
            for a in range(nb):
                _nadd(&os_[bits[a]], &oc_[bits[a]], w)
                for b in range(a + 1, nb):
                    _nadd(&ps_[bits[a], bits[b]], &pc_[bits[a], bits[b]], w)

    occ = occ_s + occ_c
    pair = pair_s + pair_c
    pair = pair + pair.T
    return emin, tot_s + tot_c, occ, pair


cdef void _free_sorted(const double* eps, int n, double* buf, double* tmp) noexcept nogil:
    # Descending free weights by repeated merge of w and w*exp(-|eps_i|).
    cdef Py_ssize_t length = 1
    cdef Py_ssize_t i, j, k, t
    cdef double f
    cdef int mode
    buf[0] = 1.0
    for mode in range(n):
        f = exp(-fabs(eps[mode]))
        i = 0
        j = 0
        k = 0
        while i < length and j < length:
            if buf[i] >= buf[j] * f:
                tmp[k] = buf[i]
                i += 1
            else:
                tmp[k] = buf[j] * f
                j += 1
            k += 1
        while i < length:
            tmp[k] = buf[i]
            i += 1
            k += 1
        while j < length:
            tmp[k] = buf[j] * f
            j += 1
            k += 1
        length *= 2
        for t in range(length):
            buf[t] = tmp[t]


cdef double _objective(const double* eps, int n, const double* target, double tail,
                       double* buf, double* tmp) noexcept nogil:
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    cdef Py_ssize_t k
    cdef double z_s = 0.0
    cdef double z_c = 0.0
    cdef double d_s = 0.0
    cdef double d_c = 0.0
    cdef double z
    _free_sorted(eps, n, buf, tmp)
    for k in range(size):
        _nadd(&z_s, &z_c, buf[k])
    z = z_s + z_c
    for k in range(size):
        _nadd(&d_s, &d_c, fabs(target[k] - buf[k] / z))
    return 0.5 * (d_s + d_c + tail)


cdef double _objective_labeled(const double* eps, int n, const double* target,
                               double* buf) noexcept nogil:
    # product of per-mode Bernoulli weights in bitmask order; no normalization needed
    cdef Py_ssize_t length = 1
    cdef Py_ssize_t m, k
    cdef double p1, p0
    cdef double d_s = 0.0
    cdef double d_c = 0.0
    cdef int mode
    buf[0] = 1.0
    for mode in range(n):
        if eps[mode] >= 0:
            p1 = exp(-eps[mode]) / (1.0 + exp(-eps[mode]))
            p0 = 1.0 / (1.0 + exp(-eps[mode]))
        else:
            p1 = 1.0 / (1.0 + exp(eps[mode]))
            p0 = exp(eps[mode]) / (1.0 + exp(eps[mode]))
        for m in range(length):
            buf[m + length] = buf[m] * p1
            buf[m] = buf[m] * p0
        length *= 2
    for k in range(length):
        _nadd(&d_s, &d_c, fabs(target[k] - buf[k]))
    return 0.5 * (d_s + d_c)


def free_sorted_probabilities(const double[::1] eps):
    """Normalized free-spectrum probabilities in descending order."""
    cdef int n = eps.shape[0]
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    out = np.empty(size, dtype=np.float64)
    tmp = np.empty(size, dtype=np.float64)
    cdef double[::1] o = out
    cdef double[::1] t = tmp
    _free_sorted(&eps[0] if n > 0 else NULL, n, &o[0], &t[0])
    cdef double s = 0.0
    cdef double c = 0.0
    cdef Py_ssize_t k
    for k in range(size):
        _nadd(&s, &c, o[k])
    return out / (s + c)


def free_fit_objective(const double[::1] eps, const double[::1] target, double tail):
    """Trace distance between a sorted target and the free spectrum of eps."""
    cdef int n = eps.shape[0]
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    if target.shape[0] != size:
        raise ValueError("target must have 2**n entries")
    buf = np.empty(size, dtype=np.float64)
    tmp = np.empty(size, dtype=np.float64)
    cdef double[::1] b = buf
    cdef double[::1] t = tmp
    return _objective(&eps[0] if n > 0 else NULL, n, &target[0], tail, &b[0], &t[0])


cdef struct _Work:
    double* buf
    double* tmp
    int labeled


cdef inline double _eval(double* x, int n, const double* target, double tail,
                         _Work* work, Py_ssize_t* nfev) noexcept nogil:
    nfev[0] += 1
    if work.labeled:
        return _objective_labeled(x, n, target, work.buf)
    return _objective(x, n, target, tail, work.buf, work.tmp)


cdef void _sort_simplex(double* sim, double* fsim, int n) noexcept nogil:
    # insertion sort of n+1 vertices by objective, stable
    cdef int i, j, c
    cdef double fv
    cdef double row[64]
    for i in range(1, n + 1):
        fv = fsim[i]
        for c in range(n):
            row[c] = sim[i * n + c]
        j = i - 1
        while j >= 0 and fsim[j] > fv:
            fsim[j + 1] = fsim[j]
            for c in range(n):
                sim[(j + 1) * n + c] = sim[j * n + c]
            j -= 1
        fsim[j + 1] = fv
        for c in range(n):
            sim[(j + 1) * n + c] = row[c]


cdef int _nelder_mead(double* x0, int n, const double* target, double tail,
                      Py_ssize_t max_evals, double tol, _Work* work,
                      double* xbest, double* fbest, Py_ssize_t* nfev) noexcept nogil:
    cdef double sim[65 * 64]
    cdef double fsim[65]
    cdef double xbar[64]
    cdef double xr[64]
    cdef double xe[64]
    cdef double xc[64]
    cdef int i, c, converged = 0
    cdef Py_ssize_t iters = 0
    cdef double fr, fe, fc, checkpoint
    cdef int shrink

    nfev[0] = 0
    for c in range(n):
        sim[c] = x0[c]
    for i in range(n):
        for c in range(n):
            sim[(i + 1) * n + c] = x0[c]
        if x0[i] != 0.0:
            sim[(i + 1) * n + i] = 1.05 * x0[i]
        else:
            sim[(i + 1) * n + i] = 0.00025
    for i in range(n + 1):
        fsim[i] = _eval(&sim[i * n], n, target, tail, work, nfev)
    _sort_simplex(sim, fsim, n)
    checkpoint = fsim[0]

    while nfev[0] < max_evals:
        for c in range(n):
            xbar[c] = 0.0
            for i in range(n):
                xbar[c] += sim[i * n + c]
            xbar[c] /= n
        for c in range(n):
            xr[c] = 2.0 * xbar[c] - sim[n * n + c]
        fr = _eval(xr, n, target, tail, work, nfev)
        shrink = 0
        if fr < fsim[0]:
            for c in range(n):
                xe[c] = 3.0 * xbar[c] - 2.0 * sim[n * n + c]
            fe = _eval(xe, n, target, tail, work, nfev)
            if fe < fr:
                for c in range(n):
                    sim[n * n + c] = xe[c]
                fsim[n] = fe
            else:
                for c in range(n):
                    sim[n * n + c] = xr[c]
                fsim[n] = fr
        elif fr < fsim[n - 1]:
            for c in range(n):
                sim[n * n + c] = xr[c]
            fsim[n] = fr
        elif fr < fsim[n]:
            for c in range(n):
                xc[c] = 1.5 * xbar[c] - 0.5 * sim[n * n + c]
            fc = _eval(xc, n, target, tail, work, nfev)
            if fc <= fr:
                for c in range(n):
                    sim[n * n + c] = xc[c]
                fsim[n] = fc
            else:
                shrink = 1
        else:
            for c in range(n):
                xc[c] = 0.5 * xbar[c] + 0.5 * sim[n * n + c]
            fc = _eval(xc, n, target, tail, work, nfev)
            if fc < fsim[n]:
                for c in range(n):
                    sim[n * n + c] = xc[c]
                fsim[n] = fc
            else:
                shrink = 1
        if shrink:
            for i in range(1, n + 1):
                for c in range(n):
                    sim[i * n + c] = sim[c] + 0.5 * (sim[i * n + c] - sim[c])
                fsim[i] = _eval(&sim[i * n], n, target, tail, work, nfev)
        _sort_simplex(sim, fsim, n)
        iters += 1
        if iters % (n + 1) == 0:
            if checkpoint - fsim[0] < tol and fsim[n] - fsim[0] < tol:
                converged = 1
                break
            checkpoint = fsim[0]

    for c in range(n):
        xbest[c] = sim[c]
    fbest[0] = fsim[0]
    return converged


def free_labeled_objective(const double[::1] eps, const double[::1] target):
    """Trace distance with levels paired by occupation label (bitmask order)."""
    cdef int n = eps.shape[0]
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    if target.shape[0] != size:
        raise ValueError("target must have 2**n entries")
    buf = np.empty(size, dtype=np.float64)
    cdef double[::1] b = buf
    return _objective_labeled(&eps[0], n, &target[0], &b[0])


def nelder_mead_fit(const double[::1] target, double tail, const double[:, ::1] starts,
                    Py_ssize_t max_evals, double tol, bint labeled=False):
    """Run one simplex search per start row.

    ``target`` is sorted descending, or in bitmask order when ``labeled``.

    Returns ``(x, f, nfev, converged)`` arrays indexed by restart.
    """
    cdef Py_ssize_t n_starts = starts.shape[0]
    cdef int n = starts.shape[1]
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    if n < 1 or n > 20:
        raise ValueError("number of modes must be in [1, 20]")
    if target.shape[0] != size:
        raise ValueError("target must have 2**n entries")
    xs = np.empty((n_starts, n), dtype=np.float64)
    fs = np.empty(n_starts, dtype=np.float64)
    nf = np.empty(n_starts, dtype=np.int64)
    conv = np.empty(n_starts, dtype=np.bool_)
    cdef double[:, ::1] xv = xs
    cdef double[::1] fv = fs
    cdef cnp.int64_t[::1] nv = nf
    cdef cnp.npy_bool[::1] cv = conv
    cdef double x0[64]
    cdef Py_ssize_t r, fev
    cdef int c, ok
    cdef _Work work
    work.labeled = labeled
    work.buf = <double*>malloc(size * sizeof(double))
    work.tmp = <double*>malloc(size * sizeof(double))
    if work.buf == NULL or work.tmp == NULL:
        free(work.buf)
        free(work.tmp)
        raise MemoryError()
    try:
        with nogil:
            for r in range(n_starts):
                for c in range(n):
                    x0[c] = starts[r, c]
                ok = _nelder_mead(x0, n, &target[0], tail, max_evals, tol, &work,
                                  &xv[r, 0], &fv[r], &fev)
                nv[r] = fev
                cv[r] = ok
    finally:
        free(work.buf)
        free(work.tmp)
    return xs, fs, nf, conv
