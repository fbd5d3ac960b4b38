"""Driven, damped Jaynes-Cummings system on a truncated Fock space.

Builds the Hamiltonian and Liouvillian of a coherently driven two-level
atom coupled to a single damped cavity mode, in the frame rotating at the
probe frequency, and solves for the steady state of

    drho/dt = -i[H, rho] + gamma (2 s rho s+ - s+s rho - rho s+s)
            + kappa (2 a rho a+ - a+a rho - rho a+a)

with H = delta_cp a+a + delta_ap s+s + g (a s+ + a+ s) + eps (a + a+)
(units of hbar = 1).  Note the dissipator convention: gamma and kappa are
the *amplitude* decay rates of the dipole and the field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .params import HBAR, HilbertSpace, SystemParams


class SteadyStateError(RuntimeError):
    """Steady-state solve failed or is untrustworthy."""


def operators(space: HilbertSpace):
    """Annihilation and dipole-lowering operators on the product basis.

    Basis ordering is |atom> x |photon>, atom index 0 = ground,
    1 = excited, so a state (i_atom, n_phot) sits at i_atom*(n_fock+1)+n_phot.
    """
    nf = space.n_fock + 1
    a_field = np.diag(np.sqrt(np.arange(1.0, nf)), 1)
    sigma = np.array([[0.0, 1.0], [0.0, 0.0]])  # |g><e|
    a = np.kron(np.eye(2), a_field).astype(complex)
    s = np.kron(sigma, np.eye(nf)).astype(complex)
    return a, s


def hamiltonian(params: SystemParams, space: HilbertSpace,
                g: float, eps: float) -> np.ndarray:
    """H/hbar (rad/s) as a dense Hermitian matrix."""
    a, s = operators(space)
    ad, sd = a.conj().T, s.conj().T
    return (params.delta_cp * (ad @ a) + params.delta_ap * (sd @ s)
            + g * (a @ sd + ad @ s) + eps * (a + ad))


def liouvillian(params: SystemParams, space: HilbertSpace,
                g: float, eps: float) -> sp.csc_matrix:
    """Sparse superoperator L with column-stacked vectorization.

    vec(A rho B) = (B^T kron A) vec(rho); the trace-preserving generator
    acts as d vec(rho)/dt = L vec(rho).
    """
    H = hamiltonian(params, space, g, eps)
    d = H.shape[0]
    eye = sp.identity(d, format="csr")
    Hs = sp.csr_matrix(H)
    L = -1j * (sp.kron(eye, Hs) - sp.kron(Hs.T, eye))
    a, s = operators(space)
    for c, rate in ((s, params.gamma), (a, params.kappa)):
        cs = sp.csr_matrix(c)
        cdc = sp.csr_matrix(c.conj().T @ c)
        L = L + rate * (2.0 * sp.kron(cs.conjugate(), cs)
                        - sp.kron(eye, cdc) - sp.kron(cdc.T, eye))
    return L.tocsc()


@dataclass(frozen=True)
class SteadyStateObservables:
    mean_field: complex      # <a>
    photon_number: float     # <a+a>
    excited_pop: float       # <s+s>
    dipole_corr: float       # <a+s + s+a>, real
    transmission: float      # |<a>|^2

    def as_tuple(self):
        return (self.mean_field, self.photon_number, self.excited_pop,
                self.dipole_corr, self.transmission)


def steady_state(params: SystemParams, space: HilbertSpace,
                 g: float, eps: float,
                 residual_tol: float = 1e-10) -> np.ndarray:
    """Steady-state density matrix of the driven damped system.

    Solves L vec(rho) = 0 with the first row of L replaced by the trace
    constraint tr(rho) = 1.  Raises SteadyStateError when the scaled
    residual ||L rho|| / ||L||_F exceeds residual_tol.
    """
    L = liouvillian(params, space, g, eps)
    d = int(np.sqrt(L.shape[0]))
    M = L.tolil(copy=True)
    M.rows[0] = list(range(0, d * d, d + 1))
    M.data[0] = [1.0 + 0.0j] * d
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1.0
    try:
        v = spla.spsolve(M.tocsc(), b)
    except Exception as exc:  # singular factorization
        raise SteadyStateError(f"sparse solve failed: {exc}") from exc
    if not np.all(np.isfinite(v)):
        raise SteadyStateError("steady-state solve returned non-finite values")
    scale = spla.norm(L)
    resid = np.linalg.norm(L @ v)
    if resid > residual_tol * scale:
        raise SteadyStateError(
            f"Liouvillian residual {resid:.3e} exceeds {residual_tol:.1e} * ||L|| "
            f"(= {residual_tol * scale:.3e}); truncation or conditioning problem"
        )
    rho = v.reshape((d, d), order="F")
    # symmetrize away the solver's rounding asymmetry
    rho = 0.5 * (rho + rho.conj().T)
    return rho


def liouvillian_residual(params: SystemParams, space: HilbertSpace,
                         g: float, eps: float, rho: np.ndarray) -> float:
    """||L vec(rho)||_2 / ||L||_F for an alleged steady state."""
    L = liouvillian(params, space, g, eps)
    return float(np.linalg.norm(L @ rho.reshape(-1, order="F")) / spla.norm(L))


def observables(rho: np.ndarray, space: HilbertSpace) -> SteadyStateObservables:
    a, s = operators(space)
    ad, sd = a.conj().T, s.conj().T
    mean_a = complex(np.trace(a @ rho))
    n = float(np.trace(ad @ a @ rho).real)
    pe = float(np.trace(sd @ s @ rho).real)
    corr = float(np.trace((ad @ s + sd @ a) @ rho).real)
    return SteadyStateObservables(
        mean_field=mean_a, photon_number=n, excited_pop=pe,
        dipole_corr=corr, transmission=abs(mean_a) ** 2,
    )


def solve_observables(params: SystemParams, space: HilbertSpace,
                      g: float, eps: float) -> SteadyStateObservables:
    return observables(steady_state(params, space, g, eps), space)


def weak_drive_mean_field(params: SystemParams, g: float, eps: float) -> complex:
    """Linear-response <a> from the zero/one-excitation subspace.

    Treating |g,0> as undepleted, the coupled amplitude equations for
    |g,1> and |e,0> give
        <a> = -i eps / [(kappa + i delta_cp) + g^2/(gamma + i delta_ap)],
    exact in the limit eps -> 0.  Kept deliberately independent of the
    full Liouvillian solver as its cross-check.
    """
    denom = (params.kappa + 1j * params.delta_cp)
    denom = denom + g**2 / (params.gamma + 1j * params.delta_ap)
    return -1j * eps / denom


def empty_cavity_mean_field(params: SystemParams, eps: float) -> complex:
    """Exact coherent amplitude of the driven empty cavity."""
    return -1j * eps / (params.kappa + 1j * params.delta_cp)


def dressed_eigenvalues(params: SystemParams, space: HilbertSpace,
                        g: float) -> np.ndarray:
    """Sorted eigenvalues (rad/s) of the undriven Hamiltonian at coupling g."""
    H = hamiltonian(params, space, g, 0.0)
    return np.sort(np.linalg.eigvalsh(H))


def force_radial(params: SystemParams, space: HilbertSpace, level: str,
                 x: float, rho: float) -> float:
    """Radial steady-state dipole force, N.

    F = -hbar (dg/drho) <a+s + s+a>_ss, the quasiclassical force for the
    position-dependent coupling g(x, rho).
    """
    g = params.coupling(x, rho)
    obs = solve_observables(params, space, g, params.drive_amplitude(level))
    dg_drho = -2.0 * rho / params.w0**2 * g
    return -HBAR * dg_drho * obs.dipole_corr


def truncation_convergence(params: SystemParams, level: str,
                           n_fock: int, g: float | None = None) -> float:
    """Relative change of <a+a> when n_fock is increased by one."""
    if g is None:
        g = params.g0
    eps = params.drive_amplitude(level)
    n0 = solve_observables(params, HilbertSpace(n_fock), g, eps).photon_number
    n1 = solve_observables(params, HilbertSpace(n_fock + 1), g, eps).photon_number
    return abs(n1 - n0) / max(abs(n1), 1e-300)
