"""Independent reference computations used as test oracles."""

import numpy as np
from scipy.integrate import quad_vec, solve_ivp
from scipy.linalg import expm


def _pack(M: np.ndarray) -> np.ndarray:
    return np.concatenate([M.real.ravel(), M.imag.ravel()])


def _unpack(y: np.ndarray, m: int) -> np.ndarray:
    half = m * m
    return (y[:half] + 1j * y[half:]).reshape(m, m)


def integrate_covariance(P: np.ndarray, H: np.ndarray, A: np.ndarray, Q0: np.ndarray,
                         t: float) -> np.ndarray:
    """Integrate dQ/dt = -G Q - Q G^H + 2A with DOP853."""
    m = P.shape[0]
    G = P + 1j * H

    def rhs(_, y):
        Q = _unpack(y, m)
        return _pack(-G @ Q - Q @ G.conj().T + 2.0 * A)

    sol = solve_ivp(rhs, (0.0, t), _pack(np.asarray(Q0, dtype=complex)), method="DOP853",
                    rtol=1e-11, atol=1e-13)
    assert sol.success
    return _unpack(sol.y[:, -1], m)


def fixed_point_integral(P: np.ndarray, H: np.ndarray, S: np.ndarray) -> np.ndarray:
    """X = 2 int_0^inf e^{-Gs} S e^{-G^H s} ds by adaptive quadrature."""
    m = P.shape[0]
    G = P + 1j * H

    def integrand(s):
        E = expm(-G * s)
        return _pack(2.0 * E @ S @ E.conj().T)

    value, _ = quad_vec(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-11)
    return _unpack(value, m)
