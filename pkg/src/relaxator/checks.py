"""Structural checks on a frequency-dependent generator L(omega) = L_P + dH(omega) - i Gamma(omega)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import dagger_superop, hermitian_basis, hermitian_quadratic_form
from .freq import FreqLiouvillian


@dataclass(frozen=True)
class ConstraintReport:
    """Worst-case values over the sampled frequencies.

    trace: max |Tr L(omega) X| over dyads X.
    herm_L, herm_H, herm_G: pairing defects [L(w)X]^+ + L(-w)X, [dH(w)X]^+ + dH(-w)X
    and [G(w)X]^+ - G(-w)X over the Hermitian basis.
    The uniform-mode entries are None for other generators: positivity is the
    smallest eigenvalue of the quadratic form Tr(X Gamma(w) X), evenness the
    largest change of that form under w -> -w, shift0 the norm of the
    quadratic form of dH(0).
    """

    trace: float
    herm_L: float
    herm_H: float
    herm_G: float
    positivity: float | None = None
    evenness: float | None = None
    shift0: float | None = None

    def items(self):
        return [(k, getattr(self, k)) for k in self.__dataclass_fields__ if getattr(self, k) is not None]


def _pairing(A, B, K, V, sign):
    # columns of V are vec(E_i); vec(X^+) = K conj(vec X)
    return float(np.max(np.abs(K @ np.conj(A @ V) + sign * (B @ V))))


def constraint_suite(FL: FreqLiouvillian, omegas, uniform: bool = False) -> ConstraintReport:
    omegas = np.atleast_1d(np.asarray(omegas, float))
    d = FL.dim
    K = dagger_superop(d)
    V = np.array([E.reshape(-1) for E in hermitian_basis(d)]).T
    one = np.eye(d).reshape(-1)
    tr = hl = hh = hg = 0.0
    pos, even = np.inf, 0.0
    for w in omegas:
        L, Lm = FL(w), FL(-w)
        dh, gam = FL.components(w)
        dhm, gamm = FL.components(-w)
        tr = max(tr, float(np.max(np.abs(one @ L))))
        hl = max(hl, _pairing(L, Lm, K, V, +1))
        hh = max(hh, _pairing(dh, dhm, K, V, +1))
        hg = max(hg, _pairing(gam, gamm, K, V, -1))
        if uniform:
            q, qm = hermitian_quadratic_form(gam), hermitian_quadratic_form(gamm)
            pos = min(pos, float(np.linalg.eigvalsh(q).min()))
            even = max(even, float(np.max(np.abs(q - qm))))
    if not uniform:
        return ConstraintReport(tr, hl, hh, hg)
    shift0 = float(np.max(np.abs(hermitian_quadratic_form(FL.shift(0.0)))))
    return ConstraintReport(tr, hl, hh, hg, pos, even, shift0)
