"""Common interface for frequency-dependent Liouvillians L(omega) = L_P + dH(omega) - i Gamma(omega)."""
from __future__ import annotations

import numpy as np


class FreqLiouvillian:
    """Base class; subclasses implement ``_components(omega)`` and ``at(z)``.

    ``__call__`` accepts a scalar or an array of real frequencies and returns
    a ``(d*d, d*d)`` matrix or a stack of them. Assembled matrices for scalar
    frequencies are memoized in an append-only dict.
    """

    markov = False
    # spacing of any tabulated bath behind at(z); Laplace contours snap to multiples of it
    lattice_step: float | None = None

    def __init__(self, lp: np.ndarray):
        self.lp = np.asarray(lp, complex)
        self.dim = int(round(np.sqrt(self.lp.shape[0])))
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def _components(self, omega: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def components(self, omega):
        """(dH(omega), Gamma(omega))."""
        omega = np.asarray(omega, float)
        if omega.ndim == 0:
            key = float(omega)
            hit = self._cache.get(key)
            if hit is None:
                dh, gam = self._components(omega[None])
                hit = (dh[0], gam[0])
                self._cache[key] = hit
            return hit
        return self._components(omega.reshape(-1))

    def shift(self, omega):
        return self.components(omega)[0]

    def relaxator(self, omega):
        return self.components(omega)[1]

    def __call__(self, omega):
        dh, gam = self.components(omega)
        return self.lp + dh - 1j * gam

    def at(self, z):
        """Analytic continuation L(z) for Im z > 0."""
        raise NotImplementedError

    def asymptotic(self) -> tuple[np.ndarray, np.ndarray]:
        """(L_inf, L1) with L(z) = L_inf + L1/z + O(z^-2) for large |z|."""
        raise NotImplementedError


class ConstantLiouvillian(FreqLiouvillian):
    """Frequency-independent generator (Markov limit, unitary dynamics, toy models)."""

    markov = True

    def __init__(self, L, lp=None, shift=None, relax=None):
        L = np.asarray(L, complex)
        if lp is None:
            lp = np.zeros_like(L)
        super().__init__(lp)
        if relax is None:
            rest = L - self.lp
            relax = 0.5j * (rest - rest.conj().T)
            shift = 0.5 * (rest + rest.conj().T)
        elif shift is None:
            shift = L - self.lp + 1j * np.asarray(relax)
        self.L = L
        self._shift = np.asarray(shift, complex)
        self._relax = np.asarray(relax, complex)

    def _components(self, omega):
        n = omega.size
        return (np.broadcast_to(self._shift, (n,) + self.L.shape),
                np.broadcast_to(self._relax, (n,) + self.L.shape))

    def __call__(self, omega):
        omega = np.asarray(omega)
        if omega.ndim == 0:
            return self.L
        return np.broadcast_to(self.L, (omega.size,) + self.L.shape)

    def at(self, z):
        z = np.asarray(z)
        if z.ndim == 0:
            return self.L
        return np.broadcast_to(self.L, (z.size,) + self.L.shape)

    def asymptotic(self):
        return self.L, np.zeros_like(self.L)
