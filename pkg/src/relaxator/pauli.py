"""Pauli master rates from the relaxator at zero frequency, detailed balance and stationary populations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .core import BohrSpectrum


def superop_components(A, basis) -> np.ndarray:
    """A[r, s, m, n] = <r| A(|m><n|) |s> in the eigenbasis of ``basis``.

    ``basis`` is a BohrSpectrum or a unitary whose columns are the basis vectors.
    """
    U = basis.eigvecs if isinstance(basis, BohrSpectrum) else np.asarray(basis, complex)
    d = U.shape[0]
    # vec(U^+ X U) = kron(U^+, U^T) vec(X)
    fwd = np.kron(U.conj().T, U.T)
    back = np.kron(U, U.conj())
    return (fwd @ np.asarray(A) @ back).reshape(d, d, d, d)


def from_components(C) -> np.ndarray:
    """Inverse of superop_components for the standard basis."""
    d = C.shape[0]
    return np.asarray(C).reshape(d * d, d * d)


@dataclass(frozen=True)
class PauliRates:
    W: np.ndarray
    energies: np.ndarray
    temperature: float | None = None

    @property
    def dim(self) -> int:
        return self.W.shape[0]


def pauli_rates(gamma0, basis: BohrSpectrum, temperature: float | None = None, tol: float = 1e-10) -> PauliRates:
    """W_rn = -Gamma_rr,nn (r != n), W_rr = -sum_{n != r} W_nr.

    Raises when the population block of Gamma(0) violates trace
    conservation (columns of Gamma_rr,nn must sum to zero).
    """
    C = superop_components(gamma0, basis)
    d = C.shape[0]
    G = np.einsum("rrnn->rn", C)
    scale = max(1.0, float(np.max(np.abs(G))))
    if np.max(np.abs(G.sum(axis=0))) > tol * scale:
        raise ValueError(f"trace conservation violated: column sums {np.max(np.abs(G.sum(axis=0))):.3g}")
    if np.max(np.abs(G.imag)) > 1e-8 * scale:
        raise ValueError("population block of Gamma(0) is not real")
    W = -G.real.copy()
    np.fill_diagonal(W, 0.0)
    W[np.diag_indices(d)] = -W.sum(axis=0)
    energies = np.asarray(basis.eigvals, float)
    return PauliRates(W, energies, temperature)


@dataclass(frozen=True)
class BalanceReport:
    max_violation: float
    rows: list

    def __bool__(self):
        return True


def detailed_balance_check(pr: PauliRates, T: float | None = None, floor: float = 1e-14) -> BalanceReport:
    """Compare W_nr with e^{-(e_n - e_r)/T} W_rn for every pair r < n.

    The violation of a pair is |W_nr - e^{-(e_n - e_r)/T} W_rn| / max(W_nr, W_rn).
    Pairs with both rates below ``floor`` are skipped. T = inf checks symmetry.
    """
    T = pr.temperature if T is None else T
    if T is None:
        raise ValueError("temperature required")
    W, e = pr.W, pr.energies
    rows = []
    worst = 0.0
    for r in range(pr.dim):
        for n in range(pr.dim):
            if r == n:
                continue
            ratio = np.nan if W[r, n] == 0 else W[n, r] / W[r, n]
            big = max(abs(W[n, r]), abs(W[r, n]))
            if big <= floor:
                viol = 0.0
            else:
                viol = abs(W[n, r] - np.exp(-(e[n] - e[r]) / T) * W[r, n]) / big
            worst = max(worst, viol)
            rows.append((r, n, W[r, n], ratio, viol))
    return BalanceReport(worst, rows)


@dataclass(frozen=True)
class PauliStationary:
    p: np.ndarray | None
    irreducible: bool
    components: list
    solutions: list


def _null_vector(W: np.ndarray) -> np.ndarray:
    ev, V = np.linalg.eig(W)
    k = int(np.argmin(np.abs(ev)))
    p = V[:, k].real
    p = p / p.sum()
    if p.min() < -1e-8:
        raise ValueError(f"stationary Pauli vector has negative entries ({p.min():.3g})")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def stationary_pauli(pr: PauliRates, threshold: float = 1e-12) -> PauliStationary:
    """Null vector of W with sum(p) = 1.

    Irreducibility is decided by strongly connected components of the graph
    with an edge n -> r whenever W_rn > threshold. For reducible W the
    stationary vectors supported on each closed class are returned and ``p``
    is None.
    """
    W = pr.W
    d = pr.dim
    adj = (W > threshold).T.astype(int)  # adj[n, r]: n -> r
    np.fill_diagonal(adj, 0)
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    if ncomp == 1:
        return PauliStationary(_null_vector(W), True, [list(range(d))], [])
    comps = [list(np.flatnonzero(labels == c)) for c in range(ncomp)]
    closed = []
    for comp in comps:
        outside = [r for r in range(d) if r not in comp]
        leaks = any(adj[n, r] for n in comp for r in outside)
        if not leaks:
            closed.append(comp)
    sols = []
    for comp in closed:
        sub = W[np.ix_(comp, comp)]
        p = np.zeros(d)
        p[comp] = _null_vector(sub) if len(comp) > 1 else 1.0
        sols.append(p)
    if len(closed) == 1:
        return PauliStationary(sols[0], False, comps, sols)
    return PauliStationary(None, False, comps, sols)


def gibbs(energies, T: float) -> np.ndarray:
    e = np.asarray(energies, float)
    w = np.exp(-(e - e.min()) / T)
    return w / w.sum()
