"""NumPy implementation of the time-stepping loop, used when the extension is absent."""
import numpy as np
from scipy.linalg.lapack import dgttrf, dgttrs


def _g(y, kind, rho, theta, r0):
    if kind == 0:
        return np.zeros_like(y)
    ay = np.abs(y)
    if kind == 1:
        return -rho * ay ** (theta - 1.0) * y
    return -rho * np.sign(y) * np.maximum(ay - r0, 0.0) ** theta


def run(y0, a_vals, profile, offset, sub, diag, sup, dirichlet, kind, rho, theta, r0, dt,
        record_every, out):
    y = np.array(y0, dtype=float)
    n = y.size
    # tridiagonal LU of (I - dt L), factored once
    dl, d, du, du2, ipiv, info = dgttrf(np.asarray(sub[1:], float), np.asarray(diag, float),
                                        np.asarray(sup[:-1], float))
    if info != 0:
        raise np.linalg.LinAlgError(f"singular diffusion matrix (info={info})")
    row = 0
    if record_every > 0:
        out[0] = y
        row = 1
    for k in range(len(a_vals) - 1):
        y1 = y + dt * ((offset + a_vals[k] * profile) * y + _g(y, kind, rho, theta, r0))
        f = (offset + a_vals[k + 1] * profile) * y1 + _g(y1, kind, rho, theta, r0)
        rhs = 0.5 * (y + y1 + dt * f)
        if dirichlet:
            rhs[0] = rhs[-1] = 0.0
        y, _ = dgttrs(dl, d, du, du2, ipiv, rhs)
        if dirichlet:
            y[0] = y[-1] = 0.0
        if record_every > 0 and (k + 1) % record_every == 0:
            out[row] = y
            row += 1
    return y
