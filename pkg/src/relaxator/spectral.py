"""Spectral solution of relaxator Liouville dynamics.

Conventions: rho(z) = i [z - L(z)]^{-1} rho0(z) for Im z > 0, and
rho(t) = (1/2pi) int dz e^{-izt} rho(z) along Im z = eps. Eigenvalues of
L(omega) are written lambda = omega_k - i delta_k with delta_k >= 0 for
stable modes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import factorial
from typing import Callable

import numpy as np

from .core import devectorize, is_hermitian
from .freq import FreqLiouvillian

DEFECT_COND = 1e8


class DefectiveError(np.linalg.LinAlgError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg, estimate=None):
        super().__init__(msg)
        self.estimate = estimate


class IncompleteModeSetError(ValueError):
    pass


@dataclass(frozen=True)
class BiorthogonalDecomposition:
    """Right vectors ``right[k]`` and left vectors ``left[k]`` with vdot(left[k], right[j]) = delta_kj."""

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    mode_cond: np.ndarray

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.right.shape[1])))

    def R(self, k: int) -> np.ndarray:
        return devectorize(self.right[k])

    def L(self, k: int) -> np.ndarray:
        return devectorize(self.left[k])

    def coefficients(self, X) -> np.ndarray:
        """a_k = (L_k | X)."""
        return self.left.conj() @ np.asarray(X).reshape(-1)

    def resynthesize(self) -> np.ndarray:
        return np.einsum("ka,k,kb->ab", self.right, self.eigenvalues, self.left.conj())


def biorth_eigendecompose(M, hermitian: bool | None = None, max_cond: float = DEFECT_COND) -> BiorthogonalDecomposition:
    """Bi-orthonormal eigensystem of a superoperator.

    Raises DefectiveError when some eigenvalue condition number
    ||l_k|| ||r_k|| / |l_k . r_k| exceeds ``max_cond``.
    """
    M = np.asarray(M, complex)
    if hermitian is None:
        hermitian = is_hermitian(M, 1e-13)
    if hermitian:
        w, V = np.linalg.eigh(0.5 * (M + M.conj().T))
        return BiorthogonalDecomposition(w.astype(complex), V.T.copy(), V.T.copy(), np.ones(w.size))
    w, V = np.linalg.eig(M)
    V = V / np.linalg.norm(V, axis=0)
    try:
        W = np.linalg.inv(V)
    except np.linalg.LinAlgError as exc:
        raise DefectiveError("eigenvector matrix is singular (defective superoperator)") from exc
    cond = np.linalg.norm(W, axis=1)
    if not np.all(np.isfinite(cond)) or cond.max() > max_cond:
        raise DefectiveError(f"near-defective eigenvalue, condition number {cond.max():.3g}")
    return BiorthogonalDecomposition(w, V.T.copy(), W.conj(), cond)


# -- effective modes ---------------------------------------------------------------

@dataclass
class Mode:
    z: complex
    right: np.ndarray
    left: np.ndarray
    residue: complex = 1.0
    multiplicity: int = 1
    converged: bool = True
    flagged: bool = False
    iterations: int = 0
    note: str = ""

    @property
    def omega(self) -> float:
        return float(self.z.real)

    @property
    def delta(self) -> float:
        return float(-self.z.imag)

    def operator(self) -> np.ndarray:
        return devectorize(self.right)


@dataclass
class EffectiveModeSet:
    modes: list
    stationary: np.ndarray | None
    zero_multiplicity: int
    dim: int
    info: dict = field(default_factory=dict)

    @property
    def z(self) -> np.ndarray:
        return np.array([m.z for m in self.modes])

    @property
    def flagged(self) -> list:
        return [m for m in self.modes if m.flagged or not m.converged]

    def completeness_error(self) -> float:
        """|| sum_k residue_k |R_k)(L_k| - 1 ||, exact zero for omega-independent L."""
        n = self.dim ** 2
        S = sum(m.residue * np.outer(m.right, m.left.conj()) for m in self.modes)
        return float(np.linalg.norm(S - np.eye(n), 2))


def _clusters(values: np.ndarray, tol: float) -> list[list[int]]:
    groups: list[list[int]] = []
    for i in np.argsort(values.real, kind="stable"):
        for g in groups:
            if abs(values[g[0]] - values[i]) <= tol:
                g.append(int(i))
                break
        else:
            groups.append([int(i)])
    return groups


def _match(dec: BiorthogonalDecomposition, vecs: np.ndarray) -> tuple[np.ndarray, float]:
    """Indices of the len(vecs) eigenvectors of ``dec`` that best span ``vecs``, and the overlap.

    The overlap is the smallest fraction of any input vector captured by the
    bi-orthogonal projector onto the chosen eigenvectors.
    """
    c = dec.left.conj() @ vecs.T  # (n_modes, m)
    weight = (np.abs(c) * np.linalg.norm(dec.right, axis=1)[:, None]) ** 2
    pick = np.argsort(-weight.sum(axis=1))[: vecs.shape[0]]
    proj = dec.right[pick].T @ c[pick]
    overlap = float(np.min(np.linalg.norm(proj, axis=0) / np.linalg.norm(vecs.T, axis=0)))
    return np.sort(pick), overlap


def effective_modes(
    FL: FreqLiouvillian,
    search_window: tuple[float, float] | None = None,
    tol: float = 1e-10,
    alpha: float = 0.5,
    max_iter: int = 200,
    overlap_min: float = 0.5,
    zero_tol: float = 1e-8,
    fd_step: float | None = None,
) -> EffectiveModeSet:
    """Solve omega_k = Re lambda_k(omega_k) branch by branch.

    Branches start at the eigenvalues of L(0); clusters of degenerate
    eigenvalues are tracked as one branch. Each branch is followed by damped
    fixed-point iteration with eigenvector-overlap matching. The residue
    factor 1/(1 - d lambda/d omega) uses a real-axis centred difference.
    """
    L0 = FL(0.0)
    d2 = L0.shape[0]
    d = int(round(np.sqrt(d2)))
    dec0 = biorth_eigendecompose(L0)
    lam0 = dec0.eigenvalues
    scale = max(1.0, float(np.max(np.abs(lam0))))
    span = max(float(np.ptp(lam0.real)), float(np.max(np.abs(lam0))), 1e-3)
    h = fd_step if fd_step is not None else 1e-4 * span
    deg_tol = zero_tol * scale
    zero_mult = int(np.sum(np.abs(lam0) <= deg_tol))

    if FL.markov:
        modes = [Mode(complex(lam0[k]), dec0.right[k], dec0.left[k]) for k in range(d2)]
    else:
        modes = []
        for b, grp in enumerate(_clusters(lam0, deg_tol)):
            for m in _follow_branch(FL, dec0, grp, tol, alpha, max_iter, overlap_min, h, search_window):
                modes.append((b, m))
        # two branches that settle on the same mode have swapped partners on the way
        for i, (bi, mi) in enumerate(modes):
            for bj, mj in modes[i + 1:]:
                if bi == bj or abs(mi.z - mj.z) > 1e-6 * scale:
                    continue
                cos = abs(np.vdot(mi.right, mj.right)) / (np.linalg.norm(mi.right) * np.linalg.norm(mj.right))
                if cos > 0.99:
                    for m in (mi, mj):
                        m.flagged = True
                        m.note = "branch merged with another branch"
        modes = [m for _, m in modes]

    modes.sort(key=lambda m: (round(m.delta, 12), m.omega))
    stationary = None
    zero = [m for m in modes if abs(m.z) <= deg_tol * 10]
    if zero_mult == 1 and len(zero) == 1:
        m = zero[0]
        R = devectorize(m.right)
        tr = np.trace(R)
        m.right = m.right / tr
        m.left = m.left * np.conj(tr)
        stationary = 0.5 * (devectorize(m.right) + devectorize(m.right).conj().T)
    elif zero_mult != 1:
        warnings.warn(f"zero eigenvalue has multiplicity {zero_mult}; stationary state not unique", stacklevel=2)
    return EffectiveModeSet(modes, stationary, zero_mult, d, {"fd_step": h})


def _follow_branch(FL, dec0, grp, tol, alpha, max_iter, overlap_min, h, window):
    m = len(grp)
    vecs = dec0.right[grp]
    lam = complex(np.mean(dec0.eigenvalues[grp]))
    w = lam.real
    flagged = False
    converged = False
    it = 0
    dec = dec0
    idx = np.array(grp)
    for it in range(1, max_iter + 1):
        dec = biorth_eigendecompose(FL(w))
        idx, ov = _match(dec, vecs)
        if ov < overlap_min:
            flagged = True
        vecs = dec.right[idx]
        lam = complex(np.mean(dec.eigenvalues[idx]))
        w_new = (1 - alpha) * w + alpha * lam.real
        if window is not None and not (window[0] <= w_new <= window[1]):
            flagged = True
            break
        if abs(w_new - w) <= tol * max(1.0, abs(w)):
            w = w_new
            converged = True
            break
        w = w_new
    dec = biorth_eigendecompose(FL(w))
    idx, ov = _match(dec, vecs)
    flagged = flagged or ov < overlap_min
    lam_k = dec.eigenvalues[idx]

    # real-axis derivative of the tracked eigenvalues
    dp = biorth_eigendecompose(FL(w + h))
    dm = biorth_eigendecompose(FL(w - h))
    ip, ovp = _match(dp, dec.right[idx])
    im, ovm = _match(dm, dec.right[idx])
    flagged = flagged or min(ovp, ovm) < overlap_min
    deriv = (np.mean(dp.eigenvalues[ip]) - np.mean(dm.eigenvalues[im])) / (2 * h)
    res = 1.0 / (1.0 - deriv)

    out = []
    for j, k in enumerate(idx):
        z = complex(w, lam_k[j].imag) if m == 1 else complex(w, np.mean(lam_k).imag)
        out.append(Mode(z, dec.right[k], dec.left[k], complex(res), m, converged, flagged, it,
                        "" if converged else "fixed point not converged"))
    return out


# -- time evolution ----------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    rho: np.ndarray
    error_estimate: float = 0.0
    info: dict = field(default_factory=dict)

    def max_antihermitian(self) -> float:
        return float(np.max(np.abs(self.rho - np.conj(np.swapaxes(self.rho, 1, 2)))))

    def max_trace_error(self) -> float:
        return float(np.max(np.abs(np.trace(self.rho, axis1=1, axis2=2) - 1)))

    def min_eigenvalue(self) -> float:
        H = 0.5 * (self.rho + np.conj(np.swapaxes(self.rho, 1, 2)))
        return float(np.min(np.linalg.eigvalsh(H)))


def evolve_residues(ms: EffectiveModeSet, rho0, times, rho0_of_z: Callable | None = None,
                    completeness_tol: float | None = None) -> Trajectory:
    """rho(t) = sum_k residue_k R_k (L_k | rho0(z_k)) e^{-i z_k t}.

    With a conjugate-paired mode set this equals rho_inf plus
    sum_k (1/2)(A_k e^{-i omega_k t} + h.c.) e^{-delta_k t}.
    """
    d = ms.dim
    if len(ms.modes) != d * d:
        raise IncompleteModeSetError(f"mode set has {len(ms.modes)} modes, expected {d * d}")
    err = ms.completeness_error()
    if completeness_tol is not None and err > completeness_tol:
        raise IncompleteModeSetError(f"mode set completeness error {err:.3g} > {completeness_tol:g}")
    times = np.atleast_1d(np.asarray(times, float))
    out = np.zeros((times.size, d * d), complex)
    for m in ms.modes:
        r0 = rho0 if rho0_of_z is None else np.asarray(rho0) + rho0_of_z(m.z)
        a = np.vdot(m.left, np.asarray(r0).reshape(-1))
        out += np.exp(-1j * m.z * times)[:, None] * (m.residue * a * m.right)[None, :]
    rho = out.reshape(-1, d, d)
    traj = Trajectory(times, rho, info={"completeness_error": err})
    traj.info["max_antihermitian"] = traj.max_antihermitian()
    return traj


def _inverse_pole_terms(b, kappa, times):
    """Inverse transform of i b_n / (z + i kappa)^n summed over n = 1.."""
    out = 0
    for n, bn in enumerate(b, start=1):
        out = out + ((-1j * times) ** (n - 1) / factorial(n - 1) * np.exp(-kappa * times))[:, None] * bn[None, :]
    return out


def evolve_laplace_grid(
    FL: FreqLiouvillian,
    rho0,
    times,
    eps: float | None = None,
    h: float | None = None,
    cutoff: float = 400.0,
    rho0_of_z: Callable | None = None,
    rho0_moments: list | None = None,
    kappa: float = 1.0,
    tol: float = 1e-6,
    chunk: int = 512,
) -> Trajectory:
    """Inverse Laplace transform of i [z - L(z)]^{-1} rho0(z) along Im z = eps.

    The large-|z| terms i b_n/(z + i kappa)^n (n <= 3) are subtracted and
    transformed analytically, so the remaining integrand decays like |z|^-4.
    The trapezoid step h controls aliasing (error ~ exp(-2 pi eps / h)).
    Convergence is estimated from the 2h and half-cutoff sub-sums; an
    estimate above ``tol`` raises ConvergenceError.

    ``rho0_of_z`` adds a z-dependent correlation term to rho0; its large-z
    coefficients [c1, c2] go in ``rho0_moments``.
    """
    times = np.atleast_1d(np.asarray(times, float))
    t_max = max(float(times.max()), 1.0)
    if eps is None:
        eps = 1.5 / t_max
    if h is None:
        h = 0.3 * eps
        step = FL.lattice_step
        if step and h >= step:
            h = float(step * np.floor(h / step))
        elif step and np.exp(-2 * np.pi * eps / step) < 1e-2 * tol:
            # off-lattice nodes lose the FFT path; the coarser lattice step still keeps aliasing small
            h = float(step)
    if not eps > 0:
        raise ValueError("contour eps must be positive")
    r0 = np.asarray(rho0, complex)
    d = r0.shape[0]
    v0 = r0.reshape(-1)

    L_inf, L1 = FL.asymptotic()
    c1, c2 = (np.zeros(d * d, complex),) * 2
    if rho0_moments is not None:
        c1 = np.asarray(rho0_moments[0]).reshape(-1)
        c2 = np.asarray(rho0_moments[1]).reshape(-1)
    a1 = v0
    a2 = L_inf @ v0 + c1
    a3 = (L_inf @ L_inf + L1) @ v0 + L_inf @ c1 + c2
    ik = 1j * kappa
    b = [a1, a2 + ik * a1, a3 + 2 * ik * a2 + ik ** 2 * a1]

    J = int(np.ceil(cutoff / h / 2)) * 2
    x = h * np.arange(-J, J + 1)
    z = x + 1j * eps
    rem = np.empty((z.size, d * d), complex)
    eye = np.eye(d * d)
    for s in range(0, z.size, chunk):
        zz = z[s:s + chunk]
        Lz = FL.at(zz)
        rhs = np.broadcast_to(v0, (zz.size, d * d)).copy()
        if rho0_of_z is not None:
            rhs += np.array([np.asarray(rho0_of_z(q)).reshape(-1) for q in zz])
        sol = 1j * np.linalg.solve(zz[:, None, None] * eye[None] - Lz, rhs[..., None])[..., 0]
        tail = sum(1j * bn[None, :] / (zz[:, None] + ik) ** n for n, bn in enumerate(b, start=1))
        rem[s:s + chunk] = sol - tail

    def quad(step_mult, cut):
        sel = (np.arange(-J, J + 1) % step_mult == 0) & (np.abs(x) <= cut + 1e-12)
        ph = np.exp(-1j * np.outer(times, x[sel]))
        return (h * step_mult / (2 * np.pi)) * np.exp(eps * times)[:, None] * (ph @ rem[sel])

    fine = quad(1, x[-1])
    coarse = quad(2, x[-1])
    short = quad(1, x[-1] / 2)
    scale = max(1.0, float(np.max(np.abs(fine))))
    alias = float(np.max(np.abs(fine - coarse))) ** 2 / scale
    trunc = float(np.max(np.abs(fine - short))) / 7
    estimate = alias + trunc
    rho = (fine + _inverse_pole_terms(b, kappa, times)).reshape(-1, d, d)
    traj = Trajectory(times, rho, estimate, {"eps": eps, "h": h, "nodes": z.size,
                                             "alias": alias, "truncation": trunc})
    if estimate > tol:
        raise ConvergenceError(f"Laplace quadrature error estimate {estimate:.3g} exceeds {tol:g}", estimate)
    return traj


# -- stationary state and resolvent --------------------------------------------------

@dataclass
class StationaryResult:
    rho: np.ndarray | None
    degeneracy: int
    null_basis: list
    residual: float
    degenerate: bool

    def __bool__(self):
        return not self.degenerate


def stationary_state(FL, rel_tol: float = 1e-8, check_tol: float = 1e-9) -> StationaryResult:
    """Zero mode of L(0).

    The multiplicity is counted from eigenvalues below ``rel_tol`` times the
    spectral norm. A degenerate kernel returns ``rho=None`` and the full null
    basis (each element Hermitized and, where possible, trace-normalized).
    """
    L0 = FL(0.0) if callable(FL) else np.asarray(FL)
    L0 = np.asarray(L0, complex)
    norm = max(np.linalg.norm(L0, 2), 1e-300)
    ev = np.linalg.eigvals(L0)
    mult = int(np.sum(np.abs(ev) <= rel_tol * norm))
    U, s, Vh = np.linalg.svd(L0)
    k = max(mult, 1)
    basis_vecs = Vh[-k:].conj()
    basis = []
    for v in basis_vecs:
        X = devectorize(v)
        tr = np.trace(X)
        if abs(tr) > 1e-8:
            X = X / tr
        basis.append(0.5 * (X + X.conj().T))
    if mult > 1:
        return StationaryResult(None, mult, basis, 0.0, True)
    rho = basis[0]
    if abs(np.trace(rho) - 1) > 1e-8:
        raise ValueError("null vector of L(0) has zero trace")
    residual = float(np.linalg.norm(L0 @ rho.reshape(-1)))
    if residual > check_tol * max(1.0, norm):
        raise ValueError(f"stationarity check failed: ||L(0) rho|| = {residual:.3g}")
    return StationaryResult(rho, mult, basis, residual, False)


def resolvent_state(FL: FreqLiouvillian, rho0, z: complex, rho0_of_z: Callable | None = None) -> np.ndarray:
    """rho(z) = i [z - L(z)]^{-1} rho0(z)."""
    z = complex(z)
    r0 = np.asarray(rho0, complex)
    if rho0_of_z is not None:
        r0 = r0 + np.asarray(rho0_of_z(z))
    Lz = FL.at(z) if z.imag > 0 else FL(z.real)
    M = z * np.eye(Lz.shape[0]) - Lz
    if np.linalg.cond(M) > 1e14:
        raise np.linalg.LinAlgError(f"z = {z} lies on the effective spectrum (singular shift)")
    return 1j * np.linalg.solve(M, r0.reshape(-1)).reshape(r0.shape)
