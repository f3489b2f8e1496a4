"""Hot numeric kernels: Hamiltonian assembly and the adaptive Dormand-Prince integrator.

A Hamiltonian is passed to the kernels in one of two flat encodings:

* affine terms, ``H(t) = sum_j f_j(t) M_j`` with ``f_j`` one of
  ``1``, ``w t + p`` or ``cos(w t + p)``;
* a piecewise cubic table (``knots`` non-empty), the coefficient layout of
  ``scipy.interpolate.CubicSpline.c`` with the matrix axes flattened.

Everything here runs either under numba or as plain numpy (see ``_jit``).
"""

import numpy as np

from ._jit import NUMBA_ENABLED, njit

TERM_CONST = 0
TERM_LINEAR = 1
TERM_COSINE = 2

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_MAX_STEPS = 2

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)
# 4th-order continuous extension (Hairer, Norsett & Wanner)
D1 = -12715105075.0 / 11282082432.0
D3 = 87487479700.0 / 32700410799.0
D4 = -10690763975.0 / 1880347072.0
D5 = 701980252875.0 / 199316789632.0
D6 = -1453857185.0 / 822651844.0
D7 = 69997945.0 / 29380423.0

# PI controller constants
SAFETY = 0.9
BETA = 0.04
EXPO1 = 0.2 - 0.75 * BETA
MAX_SHRINK = 5.0
MAX_GROWTH = 10.0


@njit
def term_coeffs(codes, freqs, phases, t, order):
    """Values of the term coefficient functions (or their ``order``-th derivative) at ``t``."""
    n = codes.shape[0]
    out = np.empty(n, dtype=np.complex128)
    for j in range(n):
        w = freqs[j]
        x = w * t + phases[j]
        code = codes[j]
        if code == TERM_CONST:
            v = 1.0 if order == 0 else 0.0
        elif code == TERM_LINEAR:
            if order == 0:
                v = x
            elif order == 1:
                v = w
            else:
                v = 0.0
        else:
            if order == 0:
                v = np.cos(x)
            elif order == 1:
                v = -w * np.sin(x)
            else:
                v = -w * w * np.cos(x)
        out[j] = v
    return out


@njit
def spline_eval(knots, coefs, t):
    """Evaluate a flattened piecewise cubic at ``t`` (clamped to the end intervals)."""
    n_int = knots.shape[0] - 1
    j = np.searchsorted(knots, t, side="right") - 1
    if j < 0:
        j = 0
    elif j > n_int - 1:
        j = n_int - 1
    dt = t - knots[j]
    return ((coefs[0, j] * dt + coefs[1, j]) * dt + coefs[2, j]) * dt + coefs[3, j]


@njit
def hamiltonian(mats2d, codes, freqs, phases, knots, coefs, t, order, dim):
    """Assemble ``d^order H / dt^order`` at ``t`` as a ``dim x dim`` complex matrix.

    Table-driven Hamiltonians only support ``order == 0`` here; their derivatives
    are taken by finite differences at the Python level.
    """
    if knots.shape[0] > 0:
        flat = spline_eval(knots, coefs, t)
    else:
        flat = term_coeffs(codes, freqs, phases, t, order) @ mats2d
    return flat.reshape((dim, dim))


def _rhs_vectorised(mats2d, codes, freqs, phases, knots, coefs, t, y):
    h = hamiltonian(mats2d, codes, freqs, phases, knots, coefs, t, 0, y.shape[0])
    return -1j * (h @ y)


@njit
def _rhs_loops(mats2d, codes, freqs, phases, knots, coefs, t, y):
    # explicit loops avoid temporaries and BLAS calls, which dominate for small N
    dim = y.shape[0]
    if knots.shape[0] > 0:
        flat = spline_eval(knots, coefs, t)
    else:
        cf = term_coeffs(codes, freqs, phases, t, 0)
        flat = np.zeros(dim * dim, dtype=np.complex128)
        for k in range(cf.shape[0]):
            a = cf[k]
            for i in range(dim * dim):
                flat[i] += a * mats2d[k, i]
    out = np.empty(dim, dtype=np.complex128)
    for i in range(dim):
        acc = 0j
        for j in range(dim):
            acc += flat[i * dim + j] * y[j]
        out[i] = -1j * acc
    return out


# plain Python loops would be far slower than numpy's vectorised form
_rhs = _rhs_loops if NUMBA_ENABLED else _rhs_vectorised


@njit
def _err_norm(v, scale):
    m = 0.0
    for i in range(v.shape[0]):
        r = np.abs(v[i]) / scale[i]
        if r > m:
            m = r
    return m


@njit
def _initial_step(mats2d, codes, freqs, phases, knots, coefs, t0, y0, f0, tol, hmax):
    scale = tol * (1.0 + np.abs(y0))
    dnf = np.sum((np.abs(f0) / scale) ** 2)
    dny = np.sum((np.abs(y0) / scale) ** 2)
    if dnf <= 1e-10 or dny <= 1e-10:
        h = 1e-6
    else:
        h = 0.01 * np.sqrt(dny / dnf)
    h = min(h, hmax)
    y1 = y0 + h * f0
    f1 = _rhs(mats2d, codes, freqs, phases, knots, coefs, t0 + h, y1)
    der2 = np.sqrt(np.sum((np.abs(f1 - f0) / scale) ** 2)) / h
    der12 = max(der2, np.sqrt(dnf))
    if der12 <= 1e-15:
        h1 = max(1e-6, h * 1e-3)
    else:
        h1 = (0.01 / der12) ** 0.2
    return min(100.0 * h, h1, hmax)


@njit
def dopri5(mats2d, codes, freqs, phases, knots, coefs, psi0, t_out, tol, max_steps):
    """Integrate ``i dpsi/dt = H(t) psi`` and sample the solution at ``t_out``.

    Steps are controlled by error per unit step, which keeps each local error
    below ``tol * h / span`` (``span`` is the full integration interval).

    Returns ``(samples, stats)`` where ``stats`` holds
    ``[accepted, rejected, status, t_last, max_local_error]``.
    The solution is never renormalised.
    """
    dim = psi0.shape[0]
    n_out = t_out.shape[0]
    out = np.zeros((n_out, dim), dtype=np.complex128)
    stats = np.zeros(5)
    y = psi0.copy()
    out[0] = y
    t = t_out[0]
    t_end = t_out[n_out - 1]
    stats[3] = t
    if n_out == 1 or t_end <= t:
        return out, stats

    span = t_end - t
    k1 = _rhs(mats2d, codes, freqs, phases, knots, coefs, t, y)
    h = _initial_step(mats2d, codes, freqs, phases, knots, coefs, t, y, k1, tol, t_end - t)
    facold = 1e-4
    n_acc = 0
    n_rej = 0
    k_out = 1
    rejected_last = False
    status = STATUS_OK
    max_err = 0.0

    while k_out < n_out:
        if n_acc + n_rej >= max_steps:
            status = STATUS_MAX_STEPS
            break
        last = False
        if t + h >= t_end:
            h = t_end - t
            last = True
        if h <= 1e-14 * max(1.0, abs(t)):
            status = STATUS_STEP_UNDERFLOW
            break

        k2 = _rhs(mats2d, codes, freqs, phases, knots, coefs, t + C2 * h, y + h * (A21 * k1))
        k3 = _rhs(mats2d, codes, freqs, phases, knots, coefs, t + C3 * h, y + h * (A31 * k1 + A32 * k2))
        k4 = _rhs(
            mats2d, codes, freqs, phases, knots, coefs, t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3)
        )
        k5 = _rhs(
            mats2d,
            codes,
            freqs,
            phases,
            knots,
            coefs,
            t + C5 * h,
            y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
        )
        t_new = t_end if last else t + h
        k6 = _rhs(
            mats2d,
            codes,
            freqs,
            phases,
            knots,
            coefs,
            t_new,
            y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
        )
        y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = _rhs(mats2d, codes, freqs, phases, knots, coefs, t_new, y_new)

        err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        # error per unit step: the per-step budget is tol * h / span, so the
        # accumulated error (and norm drift) over the whole run stays near tol
        scale = (tol * h / span) * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
        err = _err_norm(err_vec, scale)

        fac11 = err**EXPO1
        if err <= 1.0:
            if err * tol > max_err:
                max_err = err * tol
            cont2 = y_new - y
            cont3 = h * k1 - cont2
            cont4 = cont2 - h * k7 - cont3
            cont5 = h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
            while k_out < n_out and t_out[k_out] <= t_new:
                if t_out[k_out] == t_new:
                    out[k_out] = y_new
                else:
                    th = (t_out[k_out] - t) / h
                    th1 = 1.0 - th
                    out[k_out] = y + th * (cont2 + th1 * (cont3 + th * (cont4 + th1 * cont5)))
                k_out += 1
            fac = fac11 / facold**BETA
            fac = max(1.0 / MAX_GROWTH, min(MAX_SHRINK, fac / SAFETY))
            h_new = h / fac
            if rejected_last and h_new > h:
                h_new = h
            facold = max(err, 1e-4)
            y = y_new
            k1 = k7
            t = t_new
            h = h_new
            n_acc += 1
            rejected_last = False
        else:
            h = h / min(MAX_SHRINK, fac11 / SAFETY)
            n_rej += 1
            rejected_last = True

    stats[0] = n_acc
    stats[1] = n_rej
    stats[2] = status
    stats[3] = t
    stats[4] = max_err
    return out, stats


@njit
def hamiltonian_batch(mats2d, codes, freqs, phases, times, order, dim):
    """Affine-term Hamiltonians (or derivatives) at many times, shape ``(T, dim, dim)``."""
    n_t = times.shape[0]
    out = np.empty((n_t, dim * dim), dtype=np.complex128)
    for i in range(n_t):
        out[i] = term_coeffs(codes, freqs, phases, times[i], order) @ mats2d
    return out.reshape((n_t, dim, dim))
