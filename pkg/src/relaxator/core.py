"""Operator and superoperator algebra on Liouville space.

Operators are plain ``(d, d)`` complex arrays and superoperators are
``(d*d, d*d)`` arrays acting on vectorized operators. The vectorization is
row-major: the dyad ``|m><n|`` maps to the flat index ``m*d + n``. Under this
convention ``vec(A X B) = kron(A, B.T) @ vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITIAN_TOL = 1e-12


class DimensionError(ValueError):
    pass


def _square(X, name="operator"):
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {X.shape}")
    return X


def is_hermitian(X, tol=HERMITIAN_TOL):
    X = np.asarray(X)
    scale = max(np.linalg.norm(X), 1.0)
    return np.linalg.norm(X - X.conj().T) <= tol * scale


def check_hermitian(X, name="operator", tol=HERMITIAN_TOL):
    X = _square(X, name)
    if not is_hermitian(X, tol):
        raise ValueError(f"{name} is not Hermitian")
    return X


def check_density(rho, name="rho", tol=1e-12, eig_tol=1e-10):
    """Validate a density operator: Hermitian, unit trace, positive."""
    rho = check_hermitian(rho, name, tol)
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValueError(f"{name} does not have unit trace")
    if np.linalg.eigvalsh(rho).min() < -eig_tol:
        raise ValueError(f"{name} has negative eigenvalues")
    return rho


def hs_inner(A, B) -> complex:
    """Hilbert-Schmidt inner product Tr(A^dagger B)."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {B.shape}")
    return complex(np.vdot(A, B))


def vectorize(X) -> np.ndarray:
    return _square(X).reshape(-1).copy()


def devectorize(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise DimensionError(f"vector length {v.size} is not a perfect square")
    return v.reshape(d, d).copy()


def left_right_mult_superops(A):
    """Return the superoperators X -> A X and X -> X A."""
    A = _square(A)
    eye = np.eye(A.shape[0])
    return np.kron(A, eye), np.kron(eye, A.T)


def commutator_superop(H) -> np.ndarray:
    left, right = left_right_mult_superops(H)
    return left - right


def apply_superop(M, X) -> np.ndarray:
    X = _square(X)
    return (np.asarray(M) @ X.reshape(-1)).reshape(X.shape)


def superop_adjoint(M) -> np.ndarray:
    """Adjoint with respect to the Hilbert-Schmidt metric (conjugate transpose)."""
    return np.asarray(M).conj().T


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Orthonormal (HS metric) basis of Hermitian d x d matrices."""
    basis = []
    for m in range(d):
        E = np.zeros((d, d), complex)
        E[m, m] = 1.0
        basis.append(E)
    for m in range(d):
        for n in range(m + 1, d):
            E = np.zeros((d, d), complex)
            E[m, n] = E[n, m] = 1 / np.sqrt(2)
            basis.append(E)
            F = np.zeros((d, d), complex)
            F[m, n] = -1j / np.sqrt(2)
            F[n, m] = 1j / np.sqrt(2)
            basis.append(F)
    return basis


def hermitian_quadratic_form(M) -> np.ndarray:
    """Real symmetric matrix Q with x^T Q x = Tr(rho M(rho)) for rho = sum_i x_i E_i.

    The E_i run over :func:`hermitian_basis`. This is how statements of the
    form ``Tr(rho M rho)`` for Hermitian ``rho`` are checked.
    """
    M = np.asarray(M)
    d = int(round(np.sqrt(M.shape[0])))
    V = np.array([E.reshape(-1) for E in hermitian_basis(d)]).T
    Q = V.conj().T @ M @ V
    return 0.5 * (Q + Q.T).real


def dagger_superop(d: int) -> np.ndarray:
    """Permutation matrix K with vec(X^T) = K vec(X); vec(X^dagger) = K conj(vec(X))."""
    K = np.zeros((d * d, d * d))
    for m in range(d):
        for n in range(d):
            K[n * d + m, m * d + n] = 1.0
    return K


@dataclass(frozen=True)
class BohrSpectrum:
    """Energy representation of a Hermitian Hamiltonian.

    ``energies`` are the distinct (clustered) eigenvalues, ``projectors`` the
    matching eigenprojectors, ``frequencies`` the distinct Bohr frequencies
    and ``pairs[i]`` lists the ``(m, n)`` index pairs with
    ``energies[n] - energies[m] == frequencies[i]``.
    """

    energies: np.ndarray
    projectors: tuple
    frequencies: np.ndarray
    pairs: tuple
    eigvecs: np.ndarray
    eigvals: np.ndarray
    _sel_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.eigvecs.shape[0]

    def index_of(self, omega: float, tol: float | None = None) -> int:
        if tol is None:
            tol = 1e-9 * max(np.ptp(self.energies), 1.0)
        i = int(np.argmin(np.abs(self.frequencies - omega)))
        if abs(self.frequencies[i] - omega) > tol:
            raise KeyError(f"{omega} is not a Bohr frequency")
        return i

    def component(self, X, omega: float) -> np.ndarray:
        """X(w) = sum over eps_n - eps_m = w of P_m X P_n."""
        X = _square(X)
        out = np.zeros_like(X)
        for m, n in self.pairs[self.index_of(omega)]:
            out += self.projectors[m] @ X @ self.projectors[n]
        return out

    def components(self, X) -> dict:
        return {float(w): self.component(X, w) for w in self.frequencies}

    def selector(self, i: int) -> np.ndarray:
        """Superoperator X -> X(frequencies[i])."""
        if i not in self._sel_cache:
            d = self.dim
            C = np.zeros((d * d, d * d), complex)
            for m, n in self.pairs[i]:
                C += np.kron(self.projectors[m], self.projectors[n].T)
            self._sel_cache[i] = C
        return self._sel_cache[i]


def bohr_decompose(H, cluster_tol: float | None = None) -> BohrSpectrum:
    """Eigen-decompose H and cluster its Bohr frequencies.

    ``cluster_tol`` defaults to ``1e-9`` times the spectral span (absolute
    ``1e-9`` for a fully degenerate spectrum).
    """
    H = check_hermitian(H, "H")
    evals, evecs = np.linalg.eigh(H)
    span = float(evals[-1] - evals[0])
    if cluster_tol is None:
        cluster_tol = 1e-9 * span if span > 0 else 1e-9

    groups: list[list[int]] = []
    for i, e in enumerate(evals):
        if groups and e - evals[groups[-1][-1]] <= cluster_tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    energies = np.array([evals[g].mean() for g in groups])
    projectors = tuple(evecs[:, g] @ evecs[:, g].conj().T for g in groups)

    diffs = sorted(
        ((energies[n] - energies[m], m, n) for m in range(len(energies)) for n in range(len(energies))),
        key=lambda x: x[0],
    )
    freqs: list[list[float]] = []
    pairs: list[list[tuple[int, int]]] = []
    for w, m, n in diffs:
        if freqs and w - freqs[-1][0] <= cluster_tol:
            freqs[-1].append(w)
            pairs[-1].append((m, n))
        else:
            freqs.append([w])
            pairs.append([(m, n)])
    frequencies = np.array([np.mean(f) for f in freqs])
    zero = int(np.argmin(np.abs(frequencies)))
    frequencies[zero] = 0.0
    return BohrSpectrum(
        energies=energies,
        projectors=projectors,
        frequencies=frequencies,
        pairs=tuple(tuple(p) for p in pairs),
        eigvecs=evecs,
        eigvals=evals,
    )


def partial_trace_env(X_tot, d_s: int, d_e: int) -> np.ndarray:
    """Trace out the second (environment) factor of a d_s*d_e operator."""
    X_tot = _square(X_tot, "X_tot")
    if X_tot.shape[0] != d_s * d_e:
        raise DimensionError(f"dimension {X_tot.shape[0]} != {d_s}*{d_e}")
    return np.einsum("iaja->ij", X_tot.reshape(d_s, d_e, d_s, d_e))
