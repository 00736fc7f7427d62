"""Truncated two-mode Fock-space representation.

Mode operators, Gaussian unitaries, loss channels and spectral utilities
shared by every other module.  Conventions: quadratures are
x = a + a^dag and p = i(a^dag - a), so the vacuum has <x^2> = 1 and the
vacuum position density is exp(-X^2/2)/sqrt(2*pi).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
EIGENVALUE_FLOOR = -1e-9


@dataclass(frozen=True)
class FockCutoff:
    """Per-mode photon-number cutoff; local dimension d = n_max + 1."""

    n_max: int

    def __post_init__(self) -> None:
        if self.n_max < 2:
            raise ValueError(f"n_max must be >= 2, got {self.n_max}")

    @property
    def d(self) -> int:
        return self.n_max + 1

    @property
    def dim2(self) -> int:
        """Two-mode Hilbert-space dimension d**2."""
        return self.d * self.d


@dataclass(frozen=True)
class ModeOperators:
    """Single-mode operators as d x d matrices.

    x2, p2 and sym_xp are products of the truncated x and p, so their last
    rows/columns differ from the untruncated operators; all consumers use
    them consistently.
    """

    a: np.ndarray
    adag: np.ndarray
    x: np.ndarray
    p: np.ndarray
    x2: np.ndarray
    p2: np.ndarray
    sym_xp: np.ndarray


def build_mode_operators(cutoff: FockCutoff) -> ModeOperators:
    """Ladder and quadrature operators at the given cutoff.

    a[m, n] = sqrt(n) delta_{m,n-1}; x = a + a^dag; p = i(a^dag - a);
    second-order operators are matrix products of the truncated x, p.
    """
    d = cutoff.d
    a = np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex)
    adag = a.conj().T
    x = a + adag
    p = 1j * (adag - a)
    return ModeOperators(
        a=a,
        adag=adag,
        x=x,
        p=p,
        x2=x @ x,
        p2=p @ p,
        sym_xp=(x @ p + p @ x) / 2,
    )


@dataclass(frozen=True)
class TwoModeState:
    """Two-mode density matrix, indexed by (n1*d + n2, n1'*d + n2').

    trace_leakage records the probability weight discarded when the state
    was projected down from a larger working cutoff (0 if built natively).
    """

    rho: np.ndarray
    trace_leakage: float = 0.0

    @property
    def d(self) -> int:
        return int(round(np.sqrt(self.rho.shape[0])))

    @property
    def cutoff(self) -> FockCutoff:
        return FockCutoff(self.d - 1)

    def rho4(self) -> np.ndarray:
        """The density matrix reshaped to (n1, n2, n1', n2')."""
        d = self.d
        return self.rho.reshape(d, d, d, d)

    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))


def make_state(rho: np.ndarray, trace_leakage: float = 0.0,
               check_psd: bool = True) -> TwoModeState:
    """Validate, renormalize and freeze a two-mode density matrix.

    Checks Hermiticity (1e-10), renormalizes the trace, and optionally
    verifies that all eigenvalues are >= -1e-9.
    """
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0]
    d = int(round(np.sqrt(n)))
    if rho.shape != (n, n) or d * d != n:
        raise ValueError(f"expected a d^2 x d^2 matrix, got shape {rho.shape}")
    asym = np.abs(rho - rho.conj().T).max()
    if asym > HERMITICITY_TOL:
        raise ValueError(f"density matrix not Hermitian: asymmetry {asym:.3e}")
    rho = (rho + rho.conj().T) / 2
    tr = np.trace(rho).real
    if not np.isfinite(tr) or tr <= 0:
        raise ValueError(f"density matrix has invalid trace {tr}")
    rho = rho / tr
    if check_psd:
        evals = np.linalg.eigvalsh(rho)
        if evals[0] < EIGENVALUE_FLOOR:
            raise ValueError(f"density matrix has eigenvalue {evals[0]:.3e} "
                             f"below floor {EIGENVALUE_FLOOR}")
    rho.flags.writeable = False
    return TwoModeState(rho=rho, trace_leakage=float(trace_leakage))


def vacuum_state(cutoff: FockCutoff) -> TwoModeState:
    rho = np.zeros((cutoff.dim2, cutoff.dim2), dtype=complex)
    rho[0, 0] = 1.0
    return make_state(rho, check_psd=False)


def number_ket(n1: int, n2: int, cutoff: FockCutoff) -> np.ndarray:
    """Basis vector |n1, n2> of length d**2."""
    d = cutoff.d
    if not (0 <= n1 < d and 0 <= n2 < d):
        raise ValueError(f"occupation ({n1},{n2}) outside cutoff d={d}")
    ket = np.zeros(cutoff.dim2, dtype=complex)
    ket[n1 * d + n2] = 1.0
    return ket


def state_from_ket(ket: np.ndarray, trace_leakage: float = 0.0) -> TwoModeState:
    ket = np.asarray(ket, dtype=complex)
    norm = np.linalg.norm(ket)
    if norm < 1e-12:
        raise ValueError("cannot normalize a zero ket")
    ket = ket / norm
    return make_state(np.outer(ket, ket.conj()), trace_leakage=trace_leakage,
                      check_psd=False)


@dataclass(frozen=True)
class GaussianCircuit:
    """Bloch-Messiah parameters: U(bs_in) (S1 D1 x S2 D2) V(bs_out), plus loss.

    Squeezing parameters are complex xi_i = r_i exp(i w_i); a plain negative
    real xi is accepted as r exp(i pi).  Beamsplitters set to None contribute
    identity.  eta_i is the LOSS fraction (eta = 0 lossless); losses are
    applied to the state after the unitary, not inside it.
    """

    bs_in: complex | None = None
    squeeze: tuple[complex, complex] = (0j, 0j)
    displace: tuple[complex, complex] = (0j, 0j)
    bs_out: complex | None = None
    loss: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        for eta in self.loss:
            if not 0.0 <= eta <= 1.0:
                raise ValueError(f"loss fraction {eta} outside [0, 1]")


def _single_mode_squeeze_displace(xi: complex, alpha: complex, d: int) -> np.ndarray:
    """S(xi) D(alpha) on one mode: S = exp[(xi* a^2 - xi a^dag^2)/2],
    D = exp[alpha a^dag - alpha* a]."""
    a = np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex)
    adag = a.conj().T
    mat = np.eye(d, dtype=complex)
    if alpha != 0:
        mat = expm(alpha * adag - np.conj(alpha) * a)
    if xi != 0:
        mat = expm((np.conj(xi) * (a @ a) - xi * (adag @ adag)) / 2) @ mat
    return mat


def _beamsplitter_generator(phi: complex, d: int) -> np.ndarray:
    """Generator phi a1^dag a2 - phi* a1 a2^dag as a d^2 x d^2 matrix."""
    a = np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex)
    adag = a.conj().T
    eye = np.eye(d)
    return phi * np.kron(adag, a) - np.conj(phi) * np.kron(a, adag)


def _beamsplitter_blocks(phi: complex, d: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exponentiated beamsplitter as blocks over total photon number.

    The generator conserves n1 + n2, so exp splits into one small unitary
    per total-photon sector s, acting on the index set {n*d + (s-n)}.
    Returns (indices, block unitary) pairs.
    """
    sizes = []
    index_sets = []
    gens = np.zeros((2 * d - 1, d, d), dtype=complex)
    for s in range(2 * d - 1):
        ns = np.arange(max(0, s - (d - 1)), min(s, d - 1) + 1)
        index_sets.append(ns * d + (s - ns))
        m = len(ns)
        sizes.append(m)
        amp = phi * np.sqrt((ns[:-1] + 1.0) * (s - ns[:-1]))
        gens[s, np.arange(1, m), np.arange(m - 1)] = amp
        gens[s, np.arange(m - 1), np.arange(1, m)] = -np.conj(amp)
    # batched eigh of the Hermitian -i*gen; zero padding exponentiates to
    # identity, so slicing the padded exponential recovers each block
    evals, w = np.linalg.eigh(-1j * gens)
    expg = (w * np.exp(1j * evals)[:, None, :]) @ w.conj().transpose(0, 2, 1)
    return [(index_sets[s], expg[s, :sizes[s], :sizes[s]])
            for s in range(2 * d - 1)]


def _apply_beamsplitter(phi: complex, psi: np.ndarray, d: int) -> np.ndarray:
    out = psi.copy()
    for idx, block in _beamsplitter_blocks(phi, d):
        out[idx] = block @ psi[idx]
    return out


def _beamsplitter_unitary(phi: complex, d: int) -> np.ndarray:
    u = np.zeros((d * d, d * d), dtype=complex)
    for idx, block in _beamsplitter_blocks(phi, d):
        u[np.ix_(idx, idx)] = block
    return u


def gaussian_unitary(circuit: GaussianCircuit, cutoff: FockCutoff) -> np.ndarray:
    """Full d^2 x d^2 unitary U(bs_in) (S1 D1 x S2 D2) V(bs_out).

    Built by scaling-and-squaring matrix exponentials of the truncated
    generators; the truncated generators are exactly anti-Hermitian, so the
    result is unitary to machine precision at any cutoff.
    """
    d = cutoff.d
    m1 = _single_mode_squeeze_displace(circuit.squeeze[0], circuit.displace[0], d)
    m2 = _single_mode_squeeze_displace(circuit.squeeze[1], circuit.displace[1], d)
    u = np.kron(m1, m2)
    if circuit.bs_out is not None and circuit.bs_out != 0:
        u = u @ _beamsplitter_unitary(circuit.bs_out, d)
    if circuit.bs_in is not None and circuit.bs_in != 0:
        u = _beamsplitter_unitary(circuit.bs_in, d) @ u
    return u


def apply_gaussian_to_ket(circuit: GaussianCircuit, ket: np.ndarray,
                          cutoff: FockCutoff) -> np.ndarray:
    """Apply the circuit unitary to a two-mode ket without forming the
    d^2 x d^2 matrix (beamsplitters act via expm_multiply)."""
    d = cutoff.d
    psi = np.asarray(ket, dtype=complex)
    if circuit.bs_out is not None and circuit.bs_out != 0:
        psi = _apply_beamsplitter(circuit.bs_out, psi, d)
    m1 = _single_mode_squeeze_displace(circuit.squeeze[0], circuit.displace[0], d)
    m2 = _single_mode_squeeze_displace(circuit.squeeze[1], circuit.displace[1], d)
    psi = (m1 @ psi.reshape(d, d) @ m2.T).reshape(d * d)
    if circuit.bs_in is not None and circuit.bs_in != 0:
        psi = _apply_beamsplitter(circuit.bs_in, psi, d)
    return psi


def loss_kraus(eta: float, cutoff: FockCutoff) -> np.ndarray:
    """Kraus stack (n_max+1, d, d) of the single-mode loss channel.

    K_k = sum_n sqrt(C(n,k)) (1-eta)^((n-k)/2) eta^(k/2) |n-k><n| with eta
    the loss fraction.  The stack is exactly trace preserving at the cutoff.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"loss fraction {eta} outside [0, 1]")
    d = cutoff.d
    kraus = np.zeros((d, d, d), dtype=complex)
    ns = np.arange(d)
    # log-binomials keep the coefficients stable out to large n_max
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, d + 1)))))[:d + 1]
    for k in range(d):
        n = ns[k:]
        log_binom = log_fact[n] - log_fact[k] - log_fact[n - k]
        amp = np.exp(0.5 * log_binom)
        if eta > 0:
            amp = amp * eta ** (k / 2)
        elif k > 0:
            amp = amp * 0.0
        amp = amp * (1.0 - eta) ** ((n - k) / 2)
        kraus[k, n - k, n] = amp
    return kraus


def apply_loss(state: TwoModeState, eta1: float, eta2: float) -> TwoModeState:
    """Single-mode loss channels on both modes (Kraus sum per mode)."""
    for eta in (eta1, eta2):
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"loss fraction {eta} outside [0, 1]")
    d = state.d
    cutoff = state.cutoff
    rho4 = state.rho4()
    # single-mode channel matrix sum_k K_k (x) K_k* acting on the (n, n')
    # index pair of one mode; one GEMM per mode
    if eta1 > 0:
        kraus = loss_kraus(eta1, cutoff)
        chan = np.einsum("kan,kcm->acnm", kraus, kraus.conj()).reshape(d * d, d * d)
        grouped = rho4.transpose(0, 2, 1, 3).reshape(d * d, d * d)
        rho4 = (chan @ grouped).reshape(d, d, d, d).transpose(0, 2, 1, 3)
    if eta2 > 0:
        kraus = loss_kraus(eta2, cutoff)
        chan = np.einsum("kan,kcm->acnm", kraus, kraus.conj()).reshape(d * d, d * d)
        grouped = rho4.transpose(1, 3, 0, 2).reshape(d * d, d * d)
        rho4 = (chan @ grouped).reshape(d, d, d, d).transpose(2, 0, 3, 1)
    rho = np.ascontiguousarray(rho4).reshape(d * d, d * d)
    return make_state(rho, trace_leakage=state.trace_leakage, check_psd=False)


def spectral(state: TwoModeState | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Rejects inputs with Hermiticity defect above 1e-8.
    """
    mat = state.rho if isinstance(state, TwoModeState) else np.asarray(state)
    asym = np.abs(mat - mat.conj().T).max()
    if asym > 1e-8:
        raise ValueError(f"input not Hermitian: asymmetry {asym:.3e}")
    evals, evecs = np.linalg.eigh(mat)
    return evals, evecs


def partial_transpose(state: TwoModeState, mode: int = 2) -> np.ndarray:
    """Partial transpose on the given mode (1 or 2); Hermitian, unit trace."""
    if mode not in (1, 2):
        raise ValueError(f"mode must be 1 or 2, got {mode}")
    d = state.d
    rho4 = state.rho4()
    if mode == 1:
        out = rho4.transpose(2, 1, 0, 3)
    else:
        out = rho4.transpose(0, 3, 2, 1)
    return out.reshape(d * d, d * d)


def fidelity(rho: TwoModeState, sigma: TwoModeState) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 in [0, 1]."""
    if rho.rho.shape != sigma.rho.shape:
        raise ValueError(f"dimension mismatch: {rho.rho.shape} vs {sigma.rho.shape}")
    evals, evecs = spectral(rho)
    sqrt_rho = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.conj().T
    inner = sqrt_rho @ sigma.rho @ sqrt_rho
    inner_evals = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    f = float(np.sum(np.sqrt(np.clip(inner_evals, 0.0, None))) ** 2)
    return min(max(f, 0.0), 1.0)


def root_fidelity(rho: TwoModeState, sigma: TwoModeState) -> float:
    """Tr sqrt(sqrt(rho) sigma sqrt(rho)), the square root of `fidelity`.

    Tomography benchmarks are usually quoted in this convention.
    """
    return float(np.sqrt(fidelity(rho, sigma)))


def partial_trace(state: TwoModeState, keep_mode: int) -> np.ndarray:
    """Reduced d x d density matrix of one mode (1 or 2)."""
    rho4 = state.rho4()
    if keep_mode == 1:
        return np.einsum("anbn->ab", rho4)
    if keep_mode == 2:
        return np.einsum("nanb->ab", rho4)
    raise ValueError(f"keep_mode must be 1 or 2, got {keep_mode}")
