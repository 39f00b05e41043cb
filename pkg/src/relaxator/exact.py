"""Exact relaxator Liouville of a small, fully specified total system.

The total space is ``system (x) environment`` with operators ordered as
``kron(X_sys, X_env)``. The projector P maps rho_tot to Tr_env(rho_tot) (x) rho_env.
Superoperators on the total Liouville space are ``D^2 x D^2`` matrices with
``D = d_s d_e``; ``T`` (partial trace) and ``E`` (embedding X -> X (x) rho_env)
convert between the P-space and the ``d_s^2``-dimensional system Liouville
space, so that ``P = E T`` and ``T E = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DimensionError,
    check_hermitian,
    commutator_superop,
    partial_trace_env,
)
from .freq import FreqLiouvillian

MAX_TOTAL_LIOUVILLE_DIM = 4096


class SingularResolventError(np.linalg.LinAlgError):
    def __init__(self, msg, cond=np.inf):
        super().__init__(f"{msg} (condition number {cond:.3e})")
        self.cond = cond


@dataclass(frozen=True)
class TotalSystem:
    """System, environment and bilinear couplings H_int = sum_k S_k (x) B_k."""

    H: np.ndarray
    H_env: np.ndarray
    couplings: tuple
    rho_env: np.ndarray | str = "uniform"

    def __post_init__(self):
        H = check_hermitian(self.H, "H")
        H_env = check_hermitian(self.H_env, "H_env")
        pairs = []
        for k, (S, B) in enumerate(self.couplings):
            S = check_hermitian(S, f"S[{k}]")
            B = check_hermitian(B, f"B[{k}]")
            if S.shape != H.shape or B.shape != H_env.shape:
                raise DimensionError(f"coupling {k} has wrong dimensions")
            pairs.append((S, B))
        d_e = H_env.shape[0]
        if isinstance(self.rho_env, str):
            if self.rho_env != "uniform":
                raise ValueError("rho_env must be 'uniform' or a matrix")
            rho_e = np.eye(d_e, dtype=complex) / d_e
        else:
            rho_e = check_hermitian(self.rho_env, "rho_env")
            if rho_e.shape != H_env.shape:
                raise DimensionError("rho_env has wrong dimension")
            if np.linalg.norm(H_env @ rho_e - rho_e @ H_env) > 1e-10 * max(1, np.linalg.norm(H_env)):
                raise ValueError("rho_env must commute with H_env (stationary environment)")
        if (H.shape[0] * d_e) ** 2 > MAX_TOTAL_LIOUVILLE_DIM:
            raise DimensionError("total Liouville dimension exceeds 4096")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "H_env", H_env)
        object.__setattr__(self, "couplings", tuple(pairs))
        object.__setattr__(self, "_rho_e", rho_e)

    @property
    def uniform(self) -> bool:
        return isinstance(self.rho_env, str)

    @property
    def rho_e(self) -> np.ndarray:
        return self._rho_e

    @property
    def d_s(self) -> int:
        return self.H.shape[0]

    @property
    def d_e(self) -> int:
        return self.H_env.shape[0]

    @property
    def H_int(self) -> np.ndarray:
        D = self.d_s * self.d_e
        out = np.zeros((D, D), complex)
        for S, B in self.couplings:
            out += np.kron(S, B)
        return out

    @property
    def H_tot(self) -> np.ndarray:
        return (np.kron(self.H, np.eye(self.d_e)) + np.kron(np.eye(self.d_s), self.H_env)
                + self.H_int)

    def env_mean(self, B) -> complex:
        return complex(np.trace(B @ self.rho_e))

    @property
    def H_P(self) -> np.ndarray:
        """H + sum_k <B_k>_env S_k."""
        out = self.H.copy()
        for S, B in self.couplings:
            out = out + self.env_mean(B).real * S
        return out

    @property
    def dH_int(self) -> np.ndarray:
        """sum_k S_k (x) (B_k - <B_k>)."""
        D = self.d_s * self.d_e
        out = np.zeros((D, D), complex)
        for S, B in self.couplings:
            out += np.kron(S, B - self.env_mean(B) * np.eye(self.d_e))
        return out

    def scaled(self, lam: float) -> "TotalSystem":
        return TotalSystem(self.H, self.H_env, tuple((S, lam * B) for S, B in self.couplings),
                           self.rho_env)


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (X + X.conj().T) / 2


def random_density(d: int, rng: np.random.Generator) -> np.ndarray:
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = X @ X.conj().T
    return rho / np.trace(rho)


def random_total_system(d_s: int, d_e: int, rng: np.random.Generator, n_couplings: int = 1,
                        strength: float = 1.0, rho_env="uniform") -> TotalSystem:
    H = random_hermitian(d_s, rng)
    H_env = random_hermitian(d_e, rng)
    pairs = tuple((random_hermitian(d_s, rng), random_hermitian(d_e, rng, strength))
                  for _ in range(n_couplings))
    return TotalSystem(H, H_env, pairs, rho_env)


def partial_trace_superop(d_s: int, d_e: int) -> np.ndarray:
    """T with T vec(X_tot) = vec(Tr_env X_tot)."""
    I_s = np.eye(d_s)
    I_e = np.eye(d_e)
    # T[(i,j),(i',a,j',b)] = d_ii' d_jj' d_ab
    T = np.einsum("ik,jl,ab->ijkalb", I_s, I_s, I_e)
    return T.reshape(d_s * d_s, (d_s * d_e) ** 2)


def embedding_superop(rho_e: np.ndarray, d_s: int) -> np.ndarray:
    """E with E vec(X) = vec(X (x) rho_env)."""
    d_e = rho_e.shape[0]
    I_s = np.eye(d_s)
    E = np.einsum("ik,jl,ab->iajbkl", I_s, I_s, rho_e)
    return E.reshape((d_s * d_e) ** 2, d_s * d_s)


@dataclass(frozen=True)
class ProjectorPair:
    P: np.ndarray
    Q: np.ndarray
    L_P: np.ndarray
    L_PQ: np.ndarray
    L_QP: np.ndarray
    L_Q: np.ndarray
    T: np.ndarray
    E: np.ndarray
    L_tot: np.ndarray = field(repr=False)


def build_projector(ts: TotalSystem) -> ProjectorPair:
    """P rho_tot = Tr_env(rho_tot) (x) rho_env and the induced block split of L_tot."""
    tr = np.trace(ts.rho_e)
    if abs(tr - 1) > 1e-12:
        raise ValueError(f"rho_env not normalized (trace {tr})")
    T = partial_trace_superop(ts.d_s, ts.d_e)
    E = embedding_superop(ts.rho_e, ts.d_s)
    P = E @ T
    Q = np.eye(P.shape[0]) - P
    L = commutator_superop(ts.H_tot)
    return ProjectorPair(P, Q, P @ L @ P, P @ L @ Q, Q @ L @ P, Q @ L @ Q, T, E, L)


@dataclass(frozen=True)
class HamiltonianBlocks:
    H_P: np.ndarray
    L_P: np.ndarray
    L_Q: np.ndarray
    L_QP: np.ndarray
    L_PQ: np.ndarray


def hamiltonian_blocks(ts: TotalSystem, pp: ProjectorPair | None = None) -> HamiltonianBlocks:
    """Blocks written through H_P = H + sum <B_k> S_k and dB_k = B_k - <B_k>.

    L_P = E [H_P, .] T, L_QP = [dH_int, .] E T, L_PQ = E T [dH_int, .] Q and
    L_Q = [H_tot, .] Q - E T [dH_int, .] Q. These are built without forming
    P L P etc., so they can be compared with the direct sandwich.
    """
    pp = pp or build_projector(ts)
    T, E, Q = pp.T, pp.E, pp.Q
    C_int = commutator_superop(ts.dH_int)
    H_P = ts.H_P
    L_P = E @ commutator_superop(H_P) @ T
    L_QP = C_int @ E @ T
    L_PQ = E @ T @ C_int @ Q
    L_Q = commutator_superop(ts.H_tot) @ Q - E @ (T @ (C_int @ Q))
    return HamiltonianBlocks(H_P, L_P, L_Q, L_QP, L_PQ)


class ExactRelaxator:
    """Evaluator of the reduced L(z), G_Q(z) and related objects for one TotalSystem."""

    def __init__(self, ts: TotalSystem):
        self.ts = ts
        self.pp = build_projector(ts)
        pp = self.pp
        self.lp_red = pp.T @ pp.L_P @ pp.E
        self.left = pp.T @ pp.L_PQ  # d_s^2 x D^2
        self.right = pp.L_QP @ pp.E  # D^2 x d_s^2
        self._spectral = None

    # -- Q-restricted resolvent ------------------------------------------------
    def _shifted(self, z):
        pp = self.pp
        n = pp.P.shape[0]
        return pp.Q @ (z * np.eye(n) - pp.L_tot) @ pp.Q + pp.P

    def solve_q(self, z: complex, rhs: np.ndarray, return_cond: bool = False):
        """G_Q(z) rhs = Q [Q (z - L) Q + P]^{-1} Q rhs."""
        if z.imag == 0:
            raise SingularResolventError("real z: Q-restricted resolvent needs Im z != 0")
        M = self._shifted(z)
        try:
            X = np.linalg.solve(M, self.pp.Q @ rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularResolventError("Q-restricted resolvent is singular", np.linalg.cond(M)) from exc
        cond = None
        if return_cond or not np.all(np.isfinite(X)):
            cond = np.linalg.cond(M)
            if not np.isfinite(cond) or cond > 1e14:
                raise SingularResolventError("Q-restricted resolvent is near singular", cond)
        X = self.pp.Q @ X
        return (X, cond) if return_cond else X

    def G_Q(self, z: complex) -> np.ndarray:
        n = self.pp.P.shape[0]
        return self.solve_q(z, np.eye(n))

    def L(self, z: complex, return_cond: bool = False):
        """Reduced L(z) = L_P + L_PQ G_Q(z) L_QP on the system Liouville space."""
        out = self.solve_q(complex(z), self.right, return_cond=return_cond)
        X, cond = out if return_cond else (out, None)
        Lz = self.lp_red + self.left @ X
        return (Lz, cond) if return_cond else Lz

    # -- spectral fast path for sweeps ------------------------------------------
    def spectral(self):
        """Eigen-representation of Q L Q (P-block shifted off the real axis).

        Returns (mu, u, w) with L(z) = L_P + sum_j u[:, j] w[j, :] / (z - mu_j).
        """
        if self._spectral is None:
            pp = self.pp
            kappa = -1j * (1.0 + np.linalg.norm(pp.L_tot, 2))
            A = pp.L_Q + kappa * pp.P
            if self.ts.uniform:
                # Q L Q and P are commuting Hermitian matrices: A is normal
                H = pp.L_Q + pp.P * 1e3 * abs(kappa)
                mu_h, V = np.linalg.eigh(0.5 * (H + H.conj().T))
                W = V.conj().T
                mu = np.einsum("ij,jk,ki->i", W, A, V)
            else:
                mu, V = np.linalg.eig(A)
                if np.linalg.cond(V) > 1e10:
                    raise SingularResolventError("Q-block not diagonalizable", np.linalg.cond(V))
                W = np.linalg.inv(V)
            u = self.left @ pp.Q @ V
            w = W @ pp.Q @ self.right
            keep = np.abs(mu - kappa) > 1e-6 * abs(kappa)
            self._spectral = (mu[keep], u[:, keep], w[keep, :])
        return self._spectral

    def L_many(self, z) -> np.ndarray:
        z = np.asarray(z, complex).reshape(-1)
        mu, u, w = self.spectral()
        return self.lp_red[None] + np.einsum("aj,nj,jb->nab", u, 1.0 / (z[:, None] - mu[None, :]), w)

    def q_spectrum(self) -> np.ndarray:
        return np.sort(self.spectral()[0].real)


def relaxator_liouville_exact(ts: TotalSystem, z: complex, return_cond: bool = False):
    """Reduced relaxator Liouville L(z) for Im z > 0."""
    if not np.imag(z) > 0:
        raise ValueError("relaxator_liouville_exact needs Im z > 0")
    return ExactRelaxator(ts).L(z, return_cond=return_cond)


def dissipator_split_exact(ts: TotalSystem, omega: float, eps: float, ex: ExactRelaxator | None = None):
    """(dH(omega), Gamma(omega)) from the Lorentzian-regularized resolvents.

    Gamma = (i/2) L_PQ [G_Q(omega + i eps) - G_Q(omega - i eps)] L_QP and
    dH = (1/2) L_PQ [G_Q(omega + i eps) + G_Q(omega - i eps)] L_QP, so that
    L(omega + i eps) = L_P + dH - i Gamma exactly.
    """
    if not eps > 0:
        raise ValueError("broadening eps must be positive")
    ex = ex or ExactRelaxator(ts)
    Xp = ex.solve_q(omega + 1j * eps, ex.right)
    Xm = ex.solve_q(omega - 1j * eps, ex.right)
    dH = 0.5 * ex.left @ (Xp + Xm)
    gam = 0.5j * ex.left @ (Xp - Xm)
    return dH, gam


def default_broadening(ts: TotalSystem, window: tuple[float, float] | None = None) -> float:
    """5 x the mean spacing of Q-block eigenvalues inside the window."""
    ev = ExactRelaxator(ts).q_spectrum()
    if window is not None:
        ev = ev[(ev >= window[0]) & (ev <= window[1])]
    ev = np.unique(np.round(ev, 12))
    if ev.size < 2:
        return 0.1
    return 5 * float(np.mean(np.diff(ev)))


def initial_correlation_exact(ts: TotalSystem, drho_corr: np.ndarray, z: complex,
                              ex: ExactRelaxator | None = None) -> np.ndarray:
    """Initial-correlation term L_PQ G_Q(z) drho_corr reduced to the system space."""
    ex = ex or ExactRelaxator(ts)
    v = np.asarray(drho_corr, complex).reshape(-1)
    if np.linalg.norm(ex.pp.P @ v) > 1e-10 * max(1.0, np.linalg.norm(v)):
        raise ValueError("initial correlation must lie in the Q-space (Tr_env of it must vanish)")
    d = ts.d_s
    if v.size == 0 or not np.any(v):
        return np.zeros((d, d), complex)
    return (ex.left @ ex.solve_q(complex(z), v)).reshape(d, d)


def correlated_part(ts: TotalSystem, rho_tot: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split rho_tot into (Tr_env rho_tot, Q rho_tot)."""
    rho_s = partial_trace_env(rho_tot, ts.d_s, ts.d_e)
    return rho_s, rho_tot - np.kron(rho_s, ts.rho_e)


def evolve_total(ts: TotalSystem, rho_tot0: np.ndarray, times) -> np.ndarray:
    """Tr_env of the unitary evolution of the total state, shape (n_t, d_s, d_s)."""
    E, U = np.linalg.eigh(ts.H_tot)
    r = U.conj().T @ rho_tot0 @ U
    out = []
    for t in np.atleast_1d(times):
        ph = np.exp(-1j * E * t)
        rt = U @ (ph[:, None] * r * ph.conj()[None, :]) @ U.conj().T
        out.append(partial_trace_env(rt, ts.d_s, ts.d_e))
    return np.array(out)


def resolvent_total(ts: TotalSystem, z: complex) -> np.ndarray:
    L = commutator_superop(ts.H_tot)
    return np.linalg.inv(z * np.eye(L.shape[0]) - L)


class ExactLiouvillian(FreqLiouvillian):
    """FreqLiouvillian view of the exact L: L(omega) := L(omega + i eps)."""

    def __init__(self, ts: TotalSystem, eps: float):
        if not eps > 0:
            raise ValueError("eps must be positive")
        self.ex = ExactRelaxator(ts)
        self.eps = eps
        super().__init__(self.ex.lp_red)

    def _components(self, omega):
        dhs, gams = [], []
        for w in omega:
            dh, gam = dissipator_split_exact(self.ex.ts, float(w), self.eps, self.ex)
            dhs.append(dh)
            gams.append(gam)
        return np.array(dhs), np.array(gams)

    def __call__(self, omega):
        omega = np.asarray(omega, float)
        if omega.ndim == 0:
            return self.ex.L(complex(omega) + 1j * self.eps)
        return self.ex.L_many(omega + 1j * self.eps)

    def at(self, z):
        z = np.asarray(z, complex)
        if z.ndim == 0:
            return self.ex.L(complex(z))
        return self.ex.L_many(z)

    def asymptotic(self):
        ex = self.ex
        return ex.lp_red, ex.left @ ex.pp.Q @ ex.right

    def rho0_moments(self, drho_corr: np.ndarray) -> list[np.ndarray]:
        """Large-z coefficients c1, c2 of the correlation term: c1/z + c2/z^2 + ..."""
        ex = self.ex
        v = ex.pp.Q @ np.asarray(drho_corr, complex).reshape(-1)
        d = ex.ts.d_s
        return [(ex.left @ v).reshape(d, d), (ex.left @ ex.pp.L_Q @ v).reshape(d, d)]


def schur_identity_error(ts: TotalSystem, z: complex, ex: ExactRelaxator | None = None) -> float:
    """|| T G_tot(z) E - [z - L(z)]^{-1} ||_F / || [z - L(z)]^{-1} ||_F."""
    ex = ex or ExactRelaxator(ts)
    pp = ex.pp
    lhs = pp.T @ np.linalg.solve(z * np.eye(pp.L_tot.shape[0]) - pp.L_tot, pp.E)
    n = ex.lp_red.shape[0]
    rhs = np.linalg.inv(z * np.eye(n) - ex.L(z))
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
