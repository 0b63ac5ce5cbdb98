import numpy as np
import pytest


def central_diff(fun, x, step):
    """Central finite difference of a scalar function along each coordinate."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        h = step * (1.0 + abs(xf[i]))
        up = xf.copy()
        up[i] += h
        dn = xf.copy()
        dn[i] -= h
        flat[i] = (fun(up.reshape(x.shape)) - fun(dn.reshape(x.shape))) / (2.0 * h)
    return grad


def second_diff(fun, x, step):
    """Central second difference along each coordinate."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    flat = out.reshape(-1)
    xf = x.reshape(-1)
    f0 = fun(x)
    for i in range(xf.size):
        h = step * (1.0 + abs(xf[i]))
        up = xf.copy()
        up[i] += h
        dn = xf.copy()
        dn[i] -= h
        flat[i] = (fun(up.reshape(x.shape)) - 2.0 * f0 + fun(dn.reshape(x.shape))) / (h * h)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
