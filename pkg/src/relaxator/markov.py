"""Markov limit L := L(0) and its secular (Lindblad) reduction."""
from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .core import commutator_superop, left_right_mult_superops
from .freq import ConstantLiouvillian, FreqLiouvillian
from .weak import WeakCouplingModel, liouvillian_weak


def markov_liouvillian(FL: FreqLiouvillian | WeakCouplingModel) -> ConstantLiouvillian:
    """Frozen generator L(0) with its (dH(0), Gamma(0)) split."""
    if isinstance(FL, WeakCouplingModel):
        FL = liouvillian_weak(FL)
    dh, gam = FL.components(0.0)
    return ConstantLiouvillian(FL(0.0), FL.lp, dh, gam)


def secular_operators(model: WeakCouplingModel):
    """(H_LS, jumps) of the secular form.

    jumps is a list of (gamma_kk'(w), S_k(w), S_k'(w)) over Bohr frequencies w
    and channel pairs with a nonzero bath value.
    """
    spec = model.spectrum
    bath = model.bath
    d = model.dim
    H_LS = np.zeros((d, d), complex)
    jumps = []
    for w in spec.frequencies:
        comps = [spec.component(S, w) for S in model.couplings]
        gam = bath.gamma_at(w)
        s = bath.s_at(w) if bath.s is not None else np.zeros_like(gam)
        for k, Sk in enumerate(comps):
            for l, Sl in enumerate(comps):
                H_LS += s[k, l] * Sk.conj().T @ Sl
                if gam[k, l] != 0:
                    jumps.append((gam[k, l], Sk, Sl))
    return H_LS, jumps


def secular_liouvillian(model: WeakCouplingModel) -> ConstantLiouvillian:
    """L_sec = [H_P + H_LS, .] - i Gamma_sec with

    Gamma_sec rho = sum gamma_kk'(w) ({S_k(w)^+ S_k'(w), rho} - 2 S_k'(w) rho S_k(w)^+).
    """
    H_LS, jumps = secular_operators(model)
    d2 = model.dim ** 2
    gam = np.zeros((d2, d2), complex)
    for c, Sk, Sl in jumps:
        A = Sk.conj().T @ Sl
        lA, rA = left_right_mult_superops(A)
        gam += c * (lA + rA - 2 * np.kron(Sl, Sk.conj()))
    lp = commutator_superop(model.H)
    return ConstantLiouvillian(lp + commutator_superop(H_LS) - 1j * gam, lp, commutator_superop(H_LS), gam)


def choi_matrix(M: np.ndarray) -> np.ndarray:
    """Choi matrix sum_mn |m><n| (x) Phi(|m><n|) of the map with superoperator M."""
    d2 = M.shape[0]
    d = int(round(np.sqrt(d2)))
    # M[(r, s), (m, n)] -> C[(m, r), (n, s)]
    return M.reshape(d, d, d, d).transpose(2, 0, 3, 1).reshape(d2, d2)


def propagator(L: np.ndarray, t: float) -> np.ndarray:
    """exp(-i L t) for a frequency-independent generator."""
    return expm(-1j * np.asarray(L) * t)


def choi_min_eigenvalue(L: np.ndarray, t: float) -> float:
    C = choi_matrix(propagator(L, t))
    return float(np.linalg.eigvalsh(0.5 * (C + C.conj().T)).min())


def trace_preservation_error(L: np.ndarray) -> float:
    """max_X |Tr(L X)| over the dyad basis, i.e. the norm of the trace functional after L."""
    d = int(round(np.sqrt(L.shape[0])))
    one = np.eye(d).reshape(-1)
    return float(np.max(np.abs(one @ L)))
