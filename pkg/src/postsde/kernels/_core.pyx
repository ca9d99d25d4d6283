# cython: language_level=3
"""Compiled trajectory kernel for the built-in potentials.

``advance`` runs a block of theta-method steps with the noise supplied by
the caller, writing the postprocessed sample of every pre-step state.
Arithmetic follows ``postsde.schemes`` term by term.
"""
from libc.math cimport sqrt, cos, sin, fabs, isfinite
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy

cdef enum:
    QUADRATIC = 0
    DOUBLEWELL = 1
    NONSTIFF2D = 2
    STIFF3D = 3
    SPRING = 4

cdef enum:
    POST_NONE = 0
    POST_SHIFT = 1
    POST_STAB = 2
    POST_PLAIN = 3
    POST_DET = 4

STATUS_OK = 0
STATUS_EXPLODED = 1
STATUS_NEWTON = 2
STATUS_SINGULAR = 3


cdef void grad_v(int model, const double* p, int d, const double* x, double* g) noexcept nogil:
    cdef int i, j
    cdef double s, x1, x2, x3, r, g1
    if model == QUADRATIC:
        for j in range(d):
            s = 0.0
            for i in range(d):
                s += x[i] * p[i * d + j]
            g[j] = s
    elif model == DOUBLEWELL:
        x1 = x[0]
        g[0] = 4.0 * x1 * x1 * x1 - 4.0 * x1
    elif model == NONSTIFF2D:
        x1 = x[0]; x2 = x[1]
        s = x2 + x1 * x1
        g[0] = -4 * x1 * (1 - x1 * x1) - 1 + cos(x2) + 4 * x1 * s
        g[1] = 4 * x2 * x2 * x2 - x1 * sin(x2) + 2 * s
    elif model == STIFF3D:
        x1 = x[0]; x2 = x[1]; x3 = x[2]
        s = x2 + x1 * x1
        g[0] = -4 * x1 * (1 - x1 * x1) - 1 + 4 * p[1] * x1 * s + p[0] * (x1 - x3)
        g[1] = 4 * x2 * x2 * x2 - x3 * sin(x2) + 2 * p[1] * s
        g[2] = cos(x2) - p[0] * (x1 - x3)
    else:
        s = 0.0
        for i in range(d):
            s += x[i] * x[i]
        r = sqrt(s)
        if r < 1e-300:
            r = 1e-300
        g1 = -4 * p[0] * (1.0 - r) * (1.0 - r) * (1.0 - r)
        for i in range(d):
            g[i] = (g1 / r) * x[i]


cdef void hess_v(int model, const double* p, int d, const double* x, double* H) noexcept nogil:
    cdef int i, j
    cdef double s, x1, x2, x3, r, u, g1, g2, alpha, beta
    if model == QUADRATIC:
        for i in range(d * d):
            H[i] = p[i]
    elif model == DOUBLEWELL:
        H[0] = 12.0 * x[0] * x[0] - 4.0
    elif model == NONSTIFF2D:
        x1 = x[0]; x2 = x[1]
        H[0] = -4 + 24 * x1 * x1 + 4 * x2
        H[1] = -sin(x2) + 4 * x1
        H[2] = H[1]
        H[3] = 12 * x2 * x2 - x1 * cos(x2) + 2
    elif model == STIFF3D:
        x1 = x[0]; x2 = x[1]; x3 = x[2]
        H[0] = -4 + 12 * x1 * x1 + 4 * p[1] * x2 + 12 * p[1] * x1 * x1 + p[0]
        H[1] = 4 * p[1] * x1
        H[2] = -p[0]
        H[3] = H[1]
        H[4] = 12 * x2 * x2 - x3 * cos(x2) + 2 * p[1]
        H[5] = -sin(x2)
        H[6] = H[2]
        H[7] = H[5]
        H[8] = p[0]
    else:
        s = 0.0
        for i in range(d):
            s += x[i] * x[i]
        r = sqrt(s)
        if r < 1e-300:
            r = 1e-300
        u = 1.0 - r
        g1 = -4 * p[0] * u * u * u
        g2 = 12 * p[0] * u * u
        alpha = g2 - g1 / r
        beta = g1 / r
        for i in range(d):
            for j in range(d):
                H[i * d + j] = alpha * (x[i] / r) * (x[j] / r)
            H[i * d + i] += beta


cdef void drift(int model, const double* p, int d, const double* x, double* f) noexcept nogil:
    cdef int i
    grad_v(model, p, d, x, f)
    for i in range(d):
        f[i] = -f[i]


cdef void eye_minus(int model, const double* p, int d, double scale, const double* x,
                    double* J) noexcept nogil:
    """J = I - scale * f'(x) with f' = -Hessian."""
    cdef int i
    hess_v(model, p, d, x, J)
    for i in range(d * d):
        J[i] = -J[i]
        J[i] = -scale * J[i]
    for i in range(d):
        J[i * d + i] += 1.0


cdef int lu_factor(double* A, int* piv, int d) noexcept nogil:
    cdef int i, j, k, pr
    cdef double amax, t
    for i in range(d * d):
        if not isfinite(A[i]):
            return 1
    for k in range(d):
        pr = k
        amax = fabs(A[k * d + k])
        for i in range(k + 1, d):
            if fabs(A[i * d + k]) > amax:
                amax = fabs(A[i * d + k])
                pr = i
        piv[k] = pr
        if A[pr * d + k] == 0.0:
            return 1
        if pr != k:
            for j in range(d):
                t = A[k * d + j]
                A[k * d + j] = A[pr * d + j]
                A[pr * d + j] = t
        for i in range(k + 1, d):
            A[i * d + k] /= A[k * d + k]
            for j in range(k + 1, d):
                A[i * d + j] -= A[i * d + k] * A[k * d + j]
    return 0


cdef void lu_solve(const double* A, const int* piv, double* rhs, int d) noexcept nogil:
    cdef int i, j
    cdef double t
    for i in range(d):
        if piv[i] != i:
            t = rhs[i]
            rhs[i] = rhs[piv[i]]
            rhs[piv[i]] = t
    for i in range(d):
        for j in range(i):
            rhs[i] -= A[i * d + j] * rhs[j]
    for i in range(d - 1, -1, -1):
        for j in range(i + 1, d):
            rhs[i] -= A[i * d + j] * rhs[j]
        rhs[i] /= A[i * d + i]


cdef double max_abs(const double* v, int d) noexcept nogil:
    cdef int i
    cdef double m = 0.0
    for i in range(d):
        if not isfinite(v[i]):
            return 1.0 / 0.0
        if fabs(v[i]) > m:
            m = fabs(v[i])
    return m


cdef double offset_norm(const double* J, int d) noexcept nogil:
    """max-norm of J - I."""
    cdef int i, j
    cdef double s, m = 0.0, v
    for i in range(d):
        s = 0.0
        for j in range(d):
            v = J[i * d + j] - 1.0 if i == j else J[i * d + j]
            s += fabs(v)
        if s > m:
            m = s
    return m


cdef int newton(int model, const double* p, int d, double scale, const double* q,
                double* y, double* J, int* piv, int have_lu, double knorm, int once,
                double tol, int max_iter, double* r, double* fy,
                int* iters, int* facts, double* rnorm) noexcept nogil:
    """Solve y - scale f(y) = q in place. Returns 0, or 2 (no convergence) / 3 (singular).

    ``J`` is used as scratch for the matrix; with ``have_lu`` it already holds
    LU factors (and ``knorm`` the norm of ``J - I`` before factorization).
    """
    cdef int i, it = 0
    cdef double ynorm, tol_eff
    while True:
        drift(model, p, d, y, fy)
        for i in range(d):
            r[i] = y[i] - scale * fy[i] - q[i]
        rnorm[0] = max_abs(r, d)
        if not isfinite(rnorm[0]):
            iters[0] += it
            return 2
        if not have_lu or not once:
            eye_minus(model, p, d, scale, y, J)
            knorm = offset_norm(J, d)
            have_lu = 0
        ynorm = max_abs(y, d)
        tol_eff = tol
        if knorm * ynorm > 1.0:
            tol_eff = tol * (knorm * ynorm)
        if rnorm[0] <= tol_eff:
            iters[0] += it
            return 0
        if it >= max_iter:
            iters[0] += it
            return 2
        if not have_lu:
            facts[0] += 1
            if lu_factor(J, piv, d):
                iters[0] += it
                return 3
            have_lu = 1
        lu_solve(J, piv, r, d)
        for i in range(d):
            y[i] = y[i] - r[i]
        it += 1


def advance(int model, const double[::1] params, int dim,
            double theta, double a, double b, double c, int post_kind, int compute_post,
            double h, double sigma,
            double[::1] x, double[::1] prev_xi, int has_prev,
            const double[:, ::1] noise, double[:, ::1] processed,
            double tol, int max_iter, int refresh_once, double threshold):
    """Run ``noise.shape[0]`` steps in place on ``x`` / ``prev_xi``.

    Returns ``(steps_done, status, has_prev, newton_iterations,
    factorizations, last_residual)``; ``last_residual`` is the
    residual of a failed solve and 0 otherwise.
    """
    cdef int d = dim
    cdef Py_ssize_t nsteps = noise.shape[0]
    cdef Py_ssize_t n
    cdef int i, status = 0, rc, steps_done = 0
    cdef int iters = 0, facts = 0, have_stab, once = refresh_once
    cdef double rnorm = 0.0
    cdef double sq = sigma * sqrt(h)
    cdef double ash = a * sq
    cdef double csq = c * sq
    cdef double hsq = 0.5 * sq
    cdef double scale_k = h * theta
    cdef double scale_p = b * h * theta
    cdef double expl = h * (1.0 - theta)
    cdef double pexpl = b * h * (1.0 - theta)
    cdef const double* p = &params[0] if params.shape[0] > 0 else NULL
    cdef const double* xi
    cdef int do_post = compute_post
    cdef int pk = post_kind

    if x.shape[0] != d or prev_xi.shape[0] != d or noise.shape[1] != d:
        raise ValueError("dimension mismatch")
    if do_post and (processed.shape[0] < nsteps or processed.shape[1] != d):
        raise ValueError("processed buffer too small")

    cdef double* buf = <double*> malloc(sizeof(double) * (12 * d + 3 * d * d))
    cdef int* piv = <int*> malloc(sizeof(int) * 2 * d)
    if buf == NULL or piv == NULL:
        free(buf); free(piv)
        raise MemoryError()
    cdef double* xs = buf
    cdef double* fxs = buf + d
    cdef double* q = buf + 2 * d
    cdef double* y = buf + 3 * d
    cdef double* r = buf + 4 * d
    cdef double* fy = buf + 5 * d
    cdef double* xbar = buf + 6 * d
    cdef double* stage = buf + 7 * d
    cdef double* sol = buf + 8 * d
    cdef double* xcur = buf + 9 * d
    cdef double* prev = buf + 10 * d
    cdef double* fx = buf + 11 * d
    cdef double* Jstab = buf + 12 * d
    cdef double* Jk = Jstab + d * d
    cdef double* Jp = Jk + d * d
    cdef int* pivs = piv
    cdef int* pivk = piv + d
    cdef int hp = has_prev
    cdef int have_k
    cdef double knorm_k = 0.0, knorm_s = 0.0

    for i in range(d):
        xcur[i] = x[i]
        prev[i] = prev_xi[i]

    with nogil:
        for n in range(nsteps):
            xi = &noise[n, 0]
            have_stab = 0
            if do_post and pk == POST_STAB:
                for i in range(d):
                    stage[i] = xcur[i] + ash * prev[i] if (hp and a != 0.0) else xcur[i]
                eye_minus(model, p, d, h, stage, Jstab)
                knorm_s = offset_norm(Jstab, d)
                facts += 1
                if lu_factor(Jstab, pivs, d):
                    status = 3
                    break
                have_stab = 1

            for i in range(d):
                xs[i] = xcur[i] + ash * xi[i]
            drift(model, p, d, xs, fxs)
            if theta == 0.0:
                for i in range(d):
                    y[i] = xcur[i] + h * fxs[i] + sq * xi[i]
            else:
                for i in range(d):
                    q[i] = xs[i] + expl * fxs[i] + sq * xi[i]
                    y[i] = xcur[i] + h * fxs[i] + sq * xi[i] + ash * xi[i]
                have_k = 0
                if once:
                    if have_stab and theta == 1.0:
                        memcpy(Jk, Jstab, sizeof(double) * d * d)
                        memcpy(pivk, pivs, sizeof(int) * d)
                        knorm_k = knorm_s
                    else:
                        for i in range(d):
                            stage[i] = xcur[i] + ash * prev[i] if (hp and a != 0.0) else xcur[i]
                        eye_minus(model, p, d, scale_k, stage, Jk)
                        knorm_k = offset_norm(Jk, d)
                        facts += 1
                        if lu_factor(Jk, pivk, d):
                            status = 3
                            break
                    have_k = 1
                rc = newton(model, p, d, scale_k, q, y, Jk, pivk, have_k, knorm_k, once,
                            tol, max_iter, r, fy, &iters, &facts, &rnorm)
                if rc != 0:
                    status = rc
                    break
                for i in range(d):
                    y[i] = y[i] - ash * xi[i]

            if do_post:
                if pk == POST_NONE:
                    for i in range(d):
                        xbar[i] = xcur[i]
                elif pk == POST_SHIFT:
                    for i in range(d):
                        xbar[i] = xcur[i] + hsq * xi[i]
                elif pk == POST_PLAIN:
                    for i in range(d):
                        xbar[i] = xcur[i] + csq * xi[i]
                elif pk == POST_STAB:
                    for i in range(d):
                        sol[i] = xi[i]
                    lu_solve(Jstab, pivs, sol, d)
                    for i in range(d):
                        xbar[i] = xcur[i] + csq * sol[i]
                else:
                    if pexpl != 0.0:
                        drift(model, p, d, xcur, fx)
                        for i in range(d):
                            xbar[i] = xcur[i] + pexpl * fx[i] + csq * xi[i]
                    else:
                        for i in range(d):
                            xbar[i] = xcur[i] + csq * xi[i]
                    if scale_p != 0.0:
                        for i in range(d):
                            sol[i] = xbar[i]
                            xbar[i] = xcur[i] + csq * xi[i]
                        rc = newton(model, p, d, scale_p, sol, xbar, Jp, pivk, 0, 0.0, once,
                                    tol, max_iter, r, fy, &iters, &facts, &rnorm)
                        if rc != 0:
                            status = rc
                            break
                for i in range(d):
                    processed[n, i] = xbar[i]

            for i in range(d):
                xcur[i] = y[i]
                prev[i] = xi[i]
            hp = 1
            steps_done += 1
            if max_abs(xcur, d) > threshold:
                status = 1
                break

    for i in range(d):
        x[i] = xcur[i]
        prev_xi[i] = prev[i]
    free(buf)
    free(piv)
    if status == 0:
        rnorm = 0.0
    return steps_done, status, hp, iters, facts, rnorm
