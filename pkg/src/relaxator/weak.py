"""Weak-coupling relaxator Liouville assembled from Bohr components and bath correlations.

For Hermitian rho the dissipator reads

    D(w) rho = sum_{w~} sum_{kk'} g_kk'(w + w~) [S_k, (S_k' rho)(w~)]
                                 - g*_kk'(-w - w~) [S_k, (S_k' rho)(-w~)]^dagger

and its linear extension to arbitrary rho replaces the second term by
``+ g*_kk'(-w - w~) [S_k, (rho S_k')(w~)]``. With g = s - i gamma this splits
into dH (s-parts) and Gamma (gamma-parts).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bath import BathCorrelation, GridRangeError
from .core import (
    BohrSpectrum,
    bohr_decompose,
    check_hermitian,
    commutator_superop,
    left_right_mult_superops,
)
from .freq import FreqLiouvillian


@dataclass(frozen=True)
class WeakCouplingModel:
    H: np.ndarray
    couplings: tuple
    bath: BathCorrelation

    def __post_init__(self):
        H = check_hermitian(self.H, "H")
        S = tuple(check_hermitian(X, f"couplings[{k}]") for k, X in enumerate(self.couplings))
        for k, X in enumerate(S):
            if X.shape != H.shape:
                raise ValueError(f"couplings[{k}] has shape {X.shape}, expected {H.shape}")
        if self.bath.K != len(S):
            raise ValueError(f"bath has K={self.bath.K} channels but {len(S)} couplings were given")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "couplings", S)
        object.__setattr__(self, "spectrum", bohr_decompose(H))

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def bohr(self) -> np.ndarray:
        return self.spectrum.frequencies


def _blocks(spec: BohrSpectrum, couplings) -> tuple[np.ndarray, np.ndarray]:
    """A1[i,k,l] = [S_k, .] C_i (S_l .), A2[i,k,l] = [S_k, .] C_i (. S_l)."""
    K = len(couplings)
    n = spec.frequencies.size
    d2 = spec.dim ** 2
    comm = [commutator_superop(S) for S in couplings]
    lr = [left_right_mult_superops(S) for S in couplings]
    A1 = np.zeros((n, K, K, d2, d2), complex)
    A2 = np.zeros((n, K, K, d2, d2), complex)
    for i in range(n):
        C = spec.selector(i)
        for k in range(K):
            CC = comm[k] @ C
            for l in range(K):
                A1[i, k, l] = CC @ lr[l][0]
                A2[i, k, l] = CC @ lr[l][1]
    return A1, A2


def required_range(model: WeakCouplingModel, omega) -> tuple[float, float]:
    omega = np.atleast_1d(np.asarray(omega, float))
    pts = np.concatenate([(omega[:, None] + model.bohr[None]).ravel(),
                          (-omega[:, None] - model.bohr[None]).ravel()])
    return float(pts.min()), float(pts.max())


class WeakLiouvillian(FreqLiouvillian):
    def __init__(self, model: WeakCouplingModel, need_shift: bool = True):
        self.model = model
        super().__init__(commutator_superop(model.H))
        self.A1, self.A2 = _blocks(model.spectrum, model.couplings)
        self.lattice_step = model.bath.h
        if need_shift and model.bath.s is None:
            raise ValueError("bath s missing; call s_from_gamma first")

    def _tables(self, omega, table):
        bath = self.model.bath
        w = np.asarray(omega, float).reshape(-1)
        plus = w[:, None] + self.model.bohr[None, :]
        lo, hi = bath.grid[0], bath.grid[-1]
        if plus.min() < lo or plus.max() > hi or (-plus).min() < lo or (-plus).max() > hi:
            raise GridRangeError(
                f"bath grid [{lo:g}, {hi:g}] does not cover omega +/- Bohr frequencies "
                f"({-abs(plus).max():g}..{abs(plus).max():g})"
            )
        f = bath.gamma_at if table == "gamma" else bath.s_at
        return f(plus), f(-plus)

    def _assemble(self, c1, c2):
        return (np.einsum("nikl,iklab->nab", c1, self.A1)
                + np.einsum("nikl,iklab->nab", c2, self.A2))

    def _components(self, omega):
        gp, gm = self._tables(omega, "gamma")
        gam = self._assemble(gp, -np.conj(gm))
        if self.model.bath.s is None:
            dh = np.zeros_like(gam)
        else:
            sp, sm = self._tables(omega, "s")
            dh = self._assemble(sp, np.conj(sm))
        return dh, gam

    def at(self, z):
        z = np.asarray(z, complex)
        scalar = z.ndim == 0
        zf = z.reshape(-1)
        bath = self.model.bath
        c1 = np.stack([bath.g_complex(zf + w) for w in self.model.bohr], axis=1)
        c2 = np.conj(np.stack([bath.g_complex(-np.conj(zf + w)) for w in self.model.bohr], axis=1))
        out = self.lp[None] + self._assemble(c1, c2)
        return out[0] if scalar else out

    def asymptotic(self):
        m0 = self.model.bath.moment0() / np.pi
        n = self.model.bohr.size
        c1 = np.broadcast_to(m0, (1, n) + m0.shape)
        c2 = -np.conj(c1)
        return self.lp, self._assemble(c1, c2)[0]


def relaxator_weak(model: WeakCouplingModel, omega: float) -> np.ndarray:
    return WeakLiouvillian(model, need_shift=False).relaxator(omega)


def shift_weak(model: WeakCouplingModel, omega: float) -> np.ndarray:
    return WeakLiouvillian(model).shift(omega)


def liouvillian_weak(model: WeakCouplingModel) -> WeakLiouvillian:
    return WeakLiouvillian(model)


# -- qubit closed form -----------------------------------------------------------

def qubit_operators():
    """Basis ordering |g> = 0, |e> = 1. Returns (P_g, P_e, sigma_plus, sigma_minus, sigma_3)."""
    Pg = np.array([[1, 0], [0, 0]], complex)
    Pe = np.array([[0, 0], [0, 1]], complex)
    sp = np.array([[0, 0], [1, 0]], complex)  # |e><g|
    sm = sp.T.copy()
    return Pg, Pe, sp, sm, Pe - Pg


def qubit_hamiltonian(omega0: float) -> np.ndarray:
    return 0.5 * omega0 * qubit_operators()[4]


def qubit_coupling(S_g: float, S_e: float, S_eg: complex) -> np.ndarray:
    Pg, Pe, sp, sm, _ = qubit_operators()
    return S_g * Pg + S_e * Pe + S_eg * sp + np.conj(S_eg) * sm


def _qubit_dissipator(S_g, S_e, S_eg, c):
    """Superoperator of the qubit dissipator for coefficient set c.

    c = (c0, c0m, cp, cpm, cm, cmm) stand for g(w), g*(-w), g(w+w0),
    g*(-w-w0), g(w-w0), g*(-w+w0) (or their s / gamma parts).
    """
    Pg, Pe, sp, sm, s3 = qubit_operators()
    S_ge = np.conj(S_eg)
    c0, c0m, cp, cpm, cm, cmm = c
    out = np.zeros((4, 4), complex)
    for col in range(4):
        X = np.zeros(4, complex)
        X[col] = 1
        X = X.reshape(2, 2)
        rg, re, reg, rge = X[0, 0], X[1, 1], X[1, 0], X[0, 1]
        A = (S_g * rg + S_ge * reg) - (S_e * re + S_eg * rge)
        A_ = (S_g * rg + S_eg * rge) - (S_e * re + S_ge * reg)
        B = S_g * rge + S_ge * re
        B_ = S_g * reg + S_eg * re
        C = S_e * reg + S_eg * rg
        C_ = S_e * rge + S_ge * rg
        Y = ((S_eg * sp - S_ge * sm) * (c0 * A + c0m * A_)
             + ((S_g - S_e) * sm + S_eg * s3) * (cp * B + cpm * C_)
             - ((S_g - S_e) * sp + S_ge * s3) * (cm * C + cmm * B_))
        out[:, col] = Y.reshape(-1)
    return out


class QubitLiouvillian(FreqLiouvillian):
    """Closed-form qubit relaxator Liouville for S = S_g P_g + S_e P_e + S_eg s+ + h.c.

    ``form="generic"`` keeps g(x) and g*(-x) separate (valid for any bath);
    ``form="printed"`` rewrites g*(-x) = -e^{-x/T} g(x), the thermal-bath form.
    The two agree exactly in Gamma and in dH whenever s obeys the same KMS
    pairing as gamma.
    """

    def __init__(self, omega0, S_g, S_e, S_eg, bath: BathCorrelation, form: str = "generic"):
        if not bath.thermal:
            raise ValueError("qubit_liouvillian needs a thermal (KMS) bath")
        if bath.s is None:
            raise ValueError("bath s missing; call s_from_gamma first")
        if form not in ("generic", "printed"):
            raise ValueError("form must be 'generic' or 'printed'")
        self.omega0 = float(omega0)
        self.S_g, self.S_e, self.S_eg = float(S_g), float(S_e), complex(S_eg)
        self.bath = bath
        self.form = form
        super().__init__(commutator_superop(qubit_hamiltonian(omega0)))
        self.lattice_step = bath.h

    @property
    def S(self):
        return qubit_coupling(self.S_g, self.S_e, self.S_eg)

    def _basis(self):
        # the dissipator is linear in the six coefficients
        return np.array([_qubit_dissipator(self.S_g, self.S_e, self.S_eg, e) for e in np.eye(6)])

    def _coeffs(self, f, w, conj_sign):
        """f maps an array of real frequencies to scalar table values; returns six coefficient arrays."""
        w0 = self.omega0
        T = self.bath.temperature
        out = []
        for x in (w, w + w0, w - w0):
            fx = f(x)
            if self.form == "generic":
                out += [fx, conj_sign * np.conj(f(-x))]
            else:
                out += [fx, -np.exp(-x / T) * fx]
        return np.array(out)

    def _components(self, omega):
        b = self.bath
        w = np.asarray(omega, float)
        cs = self._coeffs(lambda x: b.s_at(x)[:, 0, 0], w, +1)
        cg = self._coeffs(lambda x: b.gamma_at(x)[:, 0, 0], w, -1 if self.form == "generic" else +1)
        basis = self._basis()
        return (np.einsum("in,iab->nab", cs.astype(complex), basis),
                np.einsum("in,iab->nab", cg.astype(complex), basis))

    def at(self, z):
        z = np.asarray(z, complex)
        scalar = z.ndim == 0
        zf = z.reshape(-1)
        b = self.bath
        c = []
        for w in (0.0, self.omega0, -self.omega0):
            c.append(b.g_complex(zf + w)[:, 0, 0])
            c.append(np.conj(b.g_complex(-np.conj(zf + w))[:, 0, 0]))
        out = self.lp[None] + np.einsum("in,iab->nab", np.array(c), self._basis())
        return out[0] if scalar else out

    def asymptotic(self):
        m0 = complex(self.bath.moment0()[0, 0]) / np.pi
        c = [m0, -np.conj(m0)] * 3
        return self.lp, _qubit_dissipator(self.S_g, self.S_e, self.S_eg, c)


def qubit_liouvillian(omega0, S_g, S_e, S_eg, bath, form: str = "generic") -> QubitLiouvillian:
    return QubitLiouvillian(omega0, S_g, S_e, S_eg, bath, form)


def canonical_qubit_state(omega0: float, T: float) -> np.ndarray:
    pe = np.exp(-omega0 / T) / (1 + np.exp(-omega0 / T))
    return np.diag([1 - pe, pe]).astype(complex)


# -- initial correlations ----------------------------------------------------------

def g0_from_env(H_env, B_list, drho_e_list, eps: float) -> Callable:
    """g0_kl(Omega) = sum_ab (dB_k)_ba (drho_e^(l))_ab / (Omega + i eps - (E_a - E_b)).

    ``dB_k`` is shifted by ``<B_k>`` taken with respect to ``rho_env`` only
    through the caller; here B_k are used as given because the traceless
    drho_e^(l) make constant shifts drop out.
    """
    E, U = np.linalg.eigh(np.asarray(H_env, complex))
    Bs = [U.conj().T @ np.asarray(B, complex) @ U for B in B_list]
    Rs = [U.conj().T @ np.asarray(R, complex) @ U for R in drho_e_list]
    nu = E[:, None] - E[None, :]
    w = np.einsum("kba,lab->klab", np.array(Bs), np.array(Rs))

    def g0(Omega):
        Omega = np.asarray(Omega, complex)
        den = Omega[..., None, None] + 1j * eps - nu
        return np.einsum("klab,...ab->...kl", w, 1.0 / den)

    return g0


def initial_corr_weak(model: WeakCouplingModel, drho_s0: Sequence[np.ndarray], g0: Callable,
                      omega: complex) -> np.ndarray:
    """sum_{w~} sum_kl g0_kl(omega + w~) [S_k, drho_s0^(l)(w~)]."""
    spec = model.spectrum
    d = model.dim
    out = np.zeros((d, d), complex)
    for w in spec.frequencies:
        G = np.asarray(g0(omega + w))
        comps = [spec.component(R, w) for R in drho_s0]
        for k, S in enumerate(model.couplings):
            for l, Rw in enumerate(comps):
                if G[k, l] != 0:
                    out += G[k, l] * (S @ Rw - Rw @ S)
    return out
