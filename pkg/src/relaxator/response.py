"""Dynamic susceptibilities of open (relaxator) and isolated (Kubo) generators.

chi_BA(z) = -Tr{ ([G(z) dL] rho) B } with G(z) = [z - L(z)]^{-1} and dL = [A, .].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .bath import principal_value
from .core import check_hermitian, commutator_superop
from .freq import FreqLiouvillian
from .spectral import StationaryResult, biorth_eigendecompose


class PoleError(ValueError):
    pass


@dataclass
class Susceptibility:
    omega: np.ndarray
    values: np.ndarray
    A: np.ndarray
    B: np.ndarray
    generator: str
    broadening: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    @property
    def imag(self) -> np.ndarray:
        return self.values.imag


def _drive(A, rho):
    A = np.asarray(A, complex)
    return (A @ rho - rho @ A).reshape(-1)


def _chi_from(Lz, z, A, B, rho, pole_cond=1e13, deflate=False):
    """Batched solve of [z - L(z) (+ deflation)] x = [A, rho] for a stack of L(z)."""
    v = _drive(A, rho)
    bt = np.asarray(B, complex).T.reshape(-1)
    d = rho.shape[0]
    n = d * d
    # the drive is traceless; adding i|rho)(1| removes the stationary zero mode
    # without changing the solution on the traceless subspace
    D = 1j * np.outer(rho.reshape(-1), np.eye(d).reshape(-1)) if deflate else 0
    Lz = np.broadcast_to(Lz, (z.size, n, n))
    M = z[:, None, None] * np.eye(n) - Lz + D
    sv = np.linalg.svd(M, compute_uv=False)
    bad = sv[:, -1] * pole_cond < sv[:, 0]
    if np.any(bad):
        raise PoleError(f"omega = {z[np.argmax(bad)].real:g} sits on an undamped mode")
    x = np.linalg.solve(M, np.broadcast_to(v, (z.size, n))[..., None])[..., 0]
    return -(x @ bt)


def chi_open(FL: FreqLiouvillian, rho_inf, A, B, omega, eta: float = 0.0, stat_tol: float = 1e-9) -> Susceptibility:
    """Open-system susceptibility with L(omega + i0) taken as FL(omega).

    ``rho_inf`` may be a StationaryResult; a degenerate one is refused.
    """
    if isinstance(rho_inf, StationaryResult):
        if rho_inf.degenerate:
            raise ValueError("stationary state is degenerate; the state entering chi is ambiguous")
        rho_inf = rho_inf.rho
    rho = np.asarray(rho_inf, complex)
    res = np.linalg.norm(FL(0.0) @ rho.reshape(-1))
    if res > stat_tol * max(1.0, np.linalg.norm(FL(0.0), 2)):
        raise ValueError(f"rho_inf is not stationary for L(0): residual {res:.3g}")
    omega = np.atleast_1d(np.asarray(omega, float))
    vals = _chi_from(FL(omega), omega + 1j * eta, A, B, rho, deflate=True)
    return Susceptibility(omega, vals, np.asarray(A), np.asarray(B), "open", eta)


def chi_kubo(H, rho_eq, A, B, omega, eps: float | None = None) -> Susceptibility:
    """Isolated-system susceptibility at z = omega + i eps.

    eps defaults to 1e-3 times the smallest nonzero level spacing.
    """
    H = check_hermitian(H, "H")
    rho = np.asarray(rho_eq, complex)
    if np.linalg.norm(H @ rho - rho @ H) > 1e-10 * max(1.0, np.linalg.norm(H)):
        raise ValueError("rho_eq does not commute with H")
    if eps is None:
        e = np.linalg.eigvalsh(H)
        gaps = np.diff(e)
        gaps = gaps[gaps > 1e-12]
        eps = 1e-3 * (gaps.min() if gaps.size else 1.0)
    LH = commutator_superop(H)
    omega = np.atleast_1d(np.asarray(omega, float))
    vals = _chi_from(LH, omega + 1j * eps, A, B, rho)
    return Susceptibility(omega, vals, np.asarray(A), np.asarray(B), "kubo", eps)


@dataclass
class KKReport:
    real_deviation: float
    imag_deviation: float
    reconstructed_real: np.ndarray
    reconstructed_imag: np.ndarray
    edge_fraction: float

    @property
    def max_deviation(self) -> float:
        return max(self.real_deviation, self.imag_deviation)

    @property
    def undecayed(self) -> bool:
        return self.edge_fraction > 1e-3


def kk_check(chi: Susceptibility) -> KKReport:
    """Kramers-Kronig reconstruction chi' = -(1/pi) P int chi''(w')/(w - w') and its inverse.

    Deviations are max absolute errors relative to max |chi|. The chi' from
    chi'' direction converges fastest on a finite window since chi'' decays
    like w^-2 while chi' only decays like w^-1. Needs a uniform grid fine
    enough to resolve the narrowest line. ``edge_fraction`` reports |chi| at
    the grid edge relative to its maximum (undecayed tails are reported, not fatal).
    """
    w = chi.omega
    re_rec = -principal_value(chi.imag, w) / np.pi
    im_rec = principal_value(chi.real, w) / np.pi
    scale = max(float(np.max(np.abs(chi.values))), 1e-300)
    dre = float(np.max(np.abs(re_rec - chi.real)) / scale)
    dim = float(np.max(np.abs(im_rec - chi.imag)) / scale)
    edge = float(max(abs(chi.values[0]), abs(chi.values[-1])) / scale)
    return KKReport(dre, dim, re_rec, im_rec, edge)


@dataclass
class ModeBreakdown:
    chi: complex
    weights: np.ndarray
    eigenvalues: np.ndarray
    resonance: complex | None
    resonance_estimate: float | None

    @property
    def dissipative(self) -> float:
        return float(self.chi.imag)


def chi_dissipative(FL: FreqLiouvillian, rho_inf, A, B, omega: float, resonance_window: float | None = None) -> ModeBreakdown:
    """Mode sum chi(w) = -sum_k c_k / (w - lambda_k(w)), c_k = Tr(R_k B) (L_k | [A, rho]).

    If ``omega`` lies within ``resonance_window`` of Re lambda_k for the mode
    k of smallest damping nearby, the isolated-resonance value Re(c_k)/delta_k
    is returned alongside the exact sum.
    """
    dec = biorth_eigendecompose(FL(omega))
    rho = np.asarray(rho_inf, complex)
    v = _drive(A, rho)
    bt = np.asarray(B, complex).T.reshape(-1)
    c = (dec.right @ bt) * (dec.left.conj() @ v)
    lam = dec.eigenvalues
    active = np.abs(c) > 1e-15 * max(1.0, np.abs(c).max())
    if np.any(active & (np.abs(omega - lam) < 1e-300)):
        raise PoleError("omega hits an undamped mode")
    chi = complex(-np.sum(c[active] / (omega - lam[active])))
    res = est = None
    if resonance_window is not None:
        near = np.flatnonzero(active & (np.abs(lam.real - omega) <= resonance_window))
        if near.size:
            k = near[np.argmin(-lam[near].imag)]
            res = complex(lam[k])
            est = float(c[k].real / (-lam[k].imag))
    return ModeBreakdown(chi, c, lam, res, est)


@dataclass(frozen=True)
class ResonanceFit:
    omega_BA: float
    tau_BA: float
    strength: complex
    residual: float

    @property
    def decay_dominated(self) -> float:
        """chi'' near resonance when |w - w_BA| tau << 1: Re[BA]_0 tau."""
        return float(self.strength.real * self.tau_BA)


def lorentz_model(omega, omega_BA, tau, strength):
    return -strength / (np.asarray(omega) - omega_BA + 1j / tau)


def lorentz_fit(chi: Susceptibility | tuple, window: tuple[float, float] | None = None,
                max_residual: float = 1e-2) -> ResonanceFit:
    """Least-squares fit of -[BA]_0 / (w - w_BA + i/tau) over chi' and chi'' jointly.

    The residual is the rms misfit relative to max |chi| in the window. Flat
    data or a residual above ``max_residual`` raise ValueError.
    """
    w, vals = (chi.omega, chi.values) if isinstance(chi, Susceptibility) else map(np.asarray, chi)
    if window is not None:
        sel = (w >= window[0]) & (w <= window[1])
        w, vals = w[sel], vals[sel]
    if w.size < 5:
        raise ValueError("fit window holds fewer than 5 points")
    scale = float(np.max(np.abs(vals)))
    if scale == 0 or np.ptp(np.abs(vals)) <= 1e-9 * scale:
        raise ValueError("flat susceptibility: no resonance to fit (residual undefined)")
    k = int(np.argmax(np.abs(vals.imag)))
    w0 = w[k]
    half = np.abs(vals.imag) >= 0.5 * abs(vals.imag[k])
    width = max(float(np.ptp(w[half])), 2 * float(np.min(np.diff(w))))
    tau0 = 2.0 / width
    a0 = -1j * vals[k] / tau0

    def resid(p):
        m = lorentz_model(w, p[0], np.exp(p[1]), p[2] + 1j * p[3])
        r = (m - vals) / scale
        return np.concatenate([r.real, r.imag])

    sol = least_squares(resid, [w0, np.log(tau0), a0.real, a0.imag], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    residual = float(np.sqrt(np.mean(sol.fun ** 2)))
    fit = ResonanceFit(float(sol.x[0]), float(np.exp(sol.x[1])), complex(sol.x[2], sol.x[3]), residual)
    if residual > max_residual:
        raise ValueError(f"fit rejected: residual {residual:.3g} (multi-peak or non-Lorentzian window)")
    return fit
