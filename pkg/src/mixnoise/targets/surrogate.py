"""Dense multivariate polynomial surrogate for the log forward model.

Stands in for an expensive simulator: each channel is a degree-6 polynomial
in the D normalized inputs, so log values, gradients and diagonal second
derivatives come from shared monomial tables and three matrix products.
"""
from __future__ import annotations

from itertools import product as iter_product

import numpy as np

from ..errors import ConfigurationError
from ..priors import ValidityBox
from .base import ForwardModel

MAX_DEGREE = 6


def monomial_exponents(dim: int, degree: int = MAX_DEGREE) -> np.ndarray:
    """All exponent vectors with total degree <= degree, graded lexicographic."""
    exps = [e for e in iter_product(range(degree + 1), repeat=dim) if sum(e) <= degree]
    exps.sort(key=lambda e: (sum(e), e))
    return np.array(exps, dtype=np.intp)


class PolynomialSurrogate(ForwardModel):
    """L channels of dense polynomials over a validity box.

    ``coefficients`` is (L, M) against the monomial basis of
    ``monomial_exponents(D, degree)``; the basis must be downward closed
    (always true for the dense basis) so derivatives reduce to index shifts.
    """

    def __init__(self, coefficients: np.ndarray, exponents: np.ndarray, box: ValidityBox):
        self.coefficients = np.atleast_2d(np.asarray(coefficients, dtype=float))
        self.exponents = np.asarray(exponents, dtype=np.intp)
        self.box = box
        if self.exponents.ndim != 2 or self.exponents.shape[0] != self.coefficients.shape[1]:
            raise ConfigurationError("coefficient count does not match monomial count")
        if self.exponents.shape[1] != box.dim:
            raise ConfigurationError("monomial dimension does not match box dimension")
        if int(self.exponents.sum(axis=1).max(initial=0)) > MAX_DEGREE:
            raise ConfigurationError(f"surrogate degree exceeds {MAX_DEGREE}")
        self.n_channels = self.coefficients.shape[0]
        self.dim = box.dim
        self.max_degree = int(self.exponents.sum(axis=1).max(initial=0))
        self._index = {tuple(e): i for i, e in enumerate(self.exponents.tolist())}
        self._build_shift_tables()

    def _build_shift_tables(self) -> None:
        m, d = self.exponents.shape
        self._lower1 = np.zeros((d, m), dtype=np.intp)
        self._scale1 = np.zeros((d, m))
        self._lower2 = np.zeros((d, m), dtype=np.intp)
        self._scale2 = np.zeros((d, m))
        # graded order puts every reduced monomial earlier, enabling an
        # incremental product build: phi[j] = phi[parent] * x_dim
        self._parent = np.zeros(m, dtype=np.intp)
        self._parent_dim = np.zeros(m, dtype=np.intp)
        if np.any(self.exponents[0] != 0):
            raise ConfigurationError("monomial basis must start with the constant term")
        for j, e in enumerate(self.exponents.tolist()):
            for dd in range(d):
                if e[dd] >= 1:
                    low = list(e)
                    low[dd] -= 1
                    idx = self._index.get(tuple(low))
                    if idx is None:
                        raise ConfigurationError("monomial basis is not downward closed")
                    if idx >= j:
                        raise ConfigurationError("monomial basis must be graded (parents first)")
                    self._lower1[dd, j] = idx
                    self._scale1[dd, j] = e[dd]
                    self._parent[j] = idx
                    self._parent_dim[j] = dd
                if e[dd] >= 2:
                    low = list(e)
                    low[dd] -= 2
                    self._lower2[dd, j] = self._index[tuple(low)]
                    self._scale2[dd, j] = e[dd] * (e[dd] - 1)

    def _basis_rows(self, points: np.ndarray) -> np.ndarray:
        """(M, P) monomial values, built by one multiply per monomial."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cols = np.ascontiguousarray(pts.T)
        phi = np.empty((self.exponents.shape[0], pts.shape[0]))
        phi[0] = 1.0
        for j in range(1, phi.shape[0]):
            np.multiply(phi[self._parent[j]], cols[self._parent_dim[j]], out=phi[j])
        return phi

    def log_values(self, points: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray((self.coefficients @ self._basis_rows(points)).T)

    def log_values_and_derivatives(self, points: np.ndarray):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        phi = self._basis_rows(pts)
        vals = np.ascontiguousarray((self.coefficients @ phi).T)
        p = pts.shape[0]
        grads = np.empty((p, self.n_channels, self.dim))
        hess = np.empty((p, self.n_channels, self.dim))
        for dd in range(self.dim):
            dphi = phi[self._lower1[dd]] * self._scale1[dd][:, None]
            grads[:, :, dd] = (self.coefficients @ dphi).T
            d2phi = phi[self._lower2[dd]] * self._scale2[dd][:, None]
            hess[:, :, dd] = (self.coefficients @ d2phi).T
        return vals, grads, hess


def make_synthetic_surrogate(
    dim: int,
    n_channels: int,
    decade_span: tuple[float, float],
    rng: np.random.Generator,
    box: ValidityBox | None = None,
    degree: int = MAX_DEGREE,
    n_probe: int = 4096,
) -> PolynomialSurrogate:
    """Random smooth surrogate whose channels span the requested decades.

    Coefficients decay geometrically with total degree, then each channel is
    affinely rescaled (all coefficients scaled, constant shifted) so its log
    values hit the decade targets exactly on a probe sample of the box.
    """
    if dim > 10:
        raise ConfigurationError("surrogate dimension capped at 10")
    if box is None:
        box = ValidityBox(-np.ones(dim), np.ones(dim))
    exps = monomial_exponents(dim, degree)
    total = exps.sum(axis=1)
    coeffs = rng.normal(size=(n_channels, exps.shape[0])) * 0.6**total

    probe = rng.uniform(box.lower, box.upper, size=(n_probe, dim))
    lo = float(decade_span[0]) * np.log(10.0)
    hi = float(decade_span[1]) * np.log(10.0)
    if hi <= lo:
        raise ConfigurationError("decade span must be increasing")
    surrogate = PolynomialSurrogate(coeffs, exps, box)
    vals = surrogate.log_values(probe)
    const = int(np.where(total == 0)[0][0])
    for ell in range(n_channels):
        vmin, vmax = float(vals[:, ell].min()), float(vals[:, ell].max())
        if vmax - vmin < 1e-12:
            coeffs[ell, const] = 0.5 * (lo + hi)
            continue
        scale = (hi - lo) / (vmax - vmin)
        coeffs[ell] *= scale
        coeffs[ell, const] += lo - scale * vmin
    return PolynomialSurrogate(coeffs, exps, box)


def save_surrogate_csv(path, surrogate: PolynomialSurrogate) -> None:
    """CSV rows: channel, one exponent column per dimension, coefficient."""
    d = surrogate.dim
    header = "channel," + ",".join(f"e{k}" for k in range(d)) + ",coefficient"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for ell in range(surrogate.n_channels):
            for j, e in enumerate(surrogate.exponents.tolist()):
                cells = [str(ell), *map(str, e), format(surrogate.coefficients[ell, j], ".17g")]
                fh.write(",".join(cells) + "\n")


def load_surrogate_csv(path, box: ValidityBox) -> PolynomialSurrogate:
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")
    d = box.dim
    chan = np.asarray(data["channel"], dtype=int)
    exps = np.stack([np.asarray(data[f"e{k}"], dtype=np.intp) for k in range(d)], axis=1)
    coef = np.asarray(data["coefficient"], dtype=float)
    n_channels = int(chan.max()) + 1
    per = exps.shape[0] // n_channels
    coeffs = coef.reshape(n_channels, per)
    return PolynomialSurrogate(coeffs, exps[:per], box)
