"""Random two-mode state factory.

States are built core-first: a finite-rank core state (random Fock
superposition of degree <= 2), a random Gaussian circuit, then per-mode
loss.  The circuit acts at a working cutoff above the target; the weight
lost when projecting back down is the trace leakage, and draws whose
leakage exceeds LEAKAGE_MAX are regenerated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import (
    FockCutoff,
    GaussianCircuit,
    TwoModeState,
    apply_gaussian_to_ket,
    apply_loss,
    make_state,
)

LEAKAGE_MAX = 1e-3
WORK_MARGIN = 6
MAX_ATTEMPTS = 100
CORE_SHELL_MIN_WEIGHT = 1e-4
RANK_EPS = 1e-10


@dataclass(frozen=True)
class CoreState:
    """Finite-support core |C> with coefficients on the simplex n1+n2 <= rank."""

    coeffs: np.ndarray  # (rank+1, rank+1) complex, zero where n1+n2 > rank
    rank: int

    def ket(self, cutoff: FockCutoff) -> np.ndarray:
        """Embed into the two-mode Fock space at the given cutoff."""
        d = cutoff.d
        if self.rank >= d:
            raise ValueError(f"core rank {self.rank} does not fit cutoff d={d}")
        ket = np.zeros(d * d, dtype=complex)
        m = self.coeffs.shape[0]
        for n1 in range(m):
            for n2 in range(m - n1):
                ket[n1 * d + n2] = self.coeffs[n1, n2]
        return ket


@dataclass(frozen=True)
class GenerationRanges:
    """Sampling bounds for the random circuit parameters."""

    r_max: float = 1.15
    alpha_max: float = 1.0
    eta_max: float = 0.5
    bs_prob: float = 0.5

    def __post_init__(self) -> None:
        if min(self.r_max, self.alpha_max, self.eta_max) < 0:
            raise ValueError("all generation bounds must be >= 0")
        if not 0.0 <= self.bs_prob <= 1.0:
            raise ValueError(f"bs_prob {self.bs_prob} outside [0, 1]")


def random_core_state(rank: int, seed) -> CoreState:
    """Core state with i.i.d. complex-normal coefficients on n1+n2 <= rank.

    Resamples until the degree-`rank` shell carries squared weight of at
    least 1e-4, so the stellar rank of the output equals the request.
    """
    if rank not in (0, 1, 2):
        raise ValueError(f"stellar rank must be 0, 1 or 2, got {rank}")
    rng = np.random.default_rng(seed)
    if rank == 0:
        coeffs = np.ones((1, 1), dtype=complex)
        return CoreState(coeffs=coeffs, rank=0)
    while True:
        coeffs = np.zeros((rank + 1, rank + 1), dtype=complex)
        for n1 in range(rank + 1):
            for n2 in range(rank + 1 - n1):
                coeffs[n1, n2] = rng.standard_normal() + 1j * rng.standard_normal()
        coeffs /= np.linalg.norm(coeffs)
        shell = sum(abs(coeffs[n1, rank - n1]) ** 2 for n1 in range(rank + 1))
        if shell >= CORE_SHELL_MIN_WEIGHT:
            coeffs.flags.writeable = False
            return CoreState(coeffs=coeffs, rank=rank)


def stellar_rank_of_core(core: CoreState) -> int:
    """Largest s with any |coefficient| > 1e-10 on the shell n1+n2 = s."""
    m = core.coeffs.shape[0]
    best = 0
    for n1 in range(m):
        for n2 in range(m - n1):
            if abs(core.coeffs[n1, n2]) > RANK_EPS:
                best = max(best, n1 + n2)
    return best


def _lossless_state_from_core(core: CoreState, circuit: GaussianCircuit,
                              cutoff: FockCutoff) -> tuple[np.ndarray, float]:
    """Apply the circuit at a working cutoff, project down, return
    (normalized ket at target cutoff, trace leakage)."""
    work = FockCutoff(cutoff.n_max + WORK_MARGIN)
    psi_work = apply_gaussian_to_ket(circuit, core.ket(work), work)
    d, dw = cutoff.d, work.d
    psi = psi_work.reshape(dw, dw)[:d, :d].reshape(d * d).copy()
    kept = float(np.real(np.vdot(psi, psi)))
    leakage = max(0.0, 1.0 - kept)
    if kept <= 0:
        raise ValueError("state has no weight below the cutoff")
    psi /= np.sqrt(kept)
    return psi, leakage


def synthesize_random_state(ranges: GenerationRanges, cutoff: FockCutoff, seed,
                            rank: int | None = None,
                            ) -> tuple[TwoModeState, GaussianCircuit, CoreState]:
    """Draw (core, circuit, loss), build the state, and label-ready validate.

    The stellar rank is uniform over {0, 1, 2} unless forced; each
    beamsplitter is included with probability bs_prob; squeezing magnitudes
    are uniform on [0, r_max], displacement magnitudes on [0, alpha_max],
    losses on [0, eta_max] per mode, and every phase is uniform on [0, 2pi).
    Draws exceeding the leakage budget are regenerated, up to 100 attempts.
    """
    rng = np.random.default_rng(seed)
    for _ in range(MAX_ATTEMPTS):
        r = int(rng.integers(0, 3)) if rank is None else rank
        core = random_core_state(r, rng)

        def maybe_bs() -> complex | None:
            if rng.random() >= ranges.bs_prob:
                return None
            # magnitude over one full reflectivity period
            return (rng.uniform(0, np.pi / 2)
                    * np.exp(1j * rng.uniform(0, 2 * np.pi)))

        bs_in = maybe_bs()
        squeeze = tuple(rng.uniform(0, ranges.r_max)
                        * np.exp(1j * rng.uniform(0, 2 * np.pi))
                        for _ in range(2))
        displace = tuple(rng.uniform(0, ranges.alpha_max)
                         * np.exp(1j * rng.uniform(0, 2 * np.pi))
                         for _ in range(2))
        bs_out = maybe_bs()
        loss = (rng.uniform(0, ranges.eta_max), rng.uniform(0, ranges.eta_max))
        circuit = GaussianCircuit(bs_in=bs_in, squeeze=squeeze,
                                  displace=displace, bs_out=bs_out, loss=loss)

        try:
            psi, leakage = _lossless_state_from_core(core, circuit, cutoff)
        except ValueError:
            continue
        if leakage > LEAKAGE_MAX:
            continue
        state = make_state(np.outer(psi, psi.conj()), trace_leakage=leakage,
                           check_psd=False)
        state = apply_loss(state, loss[0], loss[1])
        return state, circuit, core
    raise RuntimeError(f"no state within the leakage budget {LEAKAGE_MAX} "
                       f"after {MAX_ATTEMPTS} attempts")


def db_to_squeezing(db: float) -> float:
    """Squeezing parameter from decibels, r = dB * ln(10) / 20 (signed)."""
    return db * np.log(10.0) / 20.0


def photon_subtracted_state(r1_db: float, r2_db: float, omega1: float,
                            omega2: float, gamma: float, eta: float,
                            cutoff: FockCutoff) -> TwoModeState:
    """Lossy single-photon-subtracted two-mode squeezed state.

    S1(xi1) S2(xi2) (cos(gamma) sinh(r1) e^{i w1} |10> +
    sin(gamma) sinh(r2) e^{i w2} |01>), normalized, followed by symmetric
    loss eta on both modes.  Squeezing magnitudes come from dB values
    (r = dB ln10/20); a negative dB squeezes the conjugate quadrature.
    """
    if not 0.0 <= gamma <= np.pi / 2:
        raise ValueError(f"gamma {gamma} outside [0, pi/2]")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta {eta} outside [0, 1]")
    r1 = db_to_squeezing(r1_db)
    r2 = db_to_squeezing(r2_db)
    c10 = np.cos(gamma) * np.sinh(r1) * np.exp(1j * omega1)
    c01 = np.sin(gamma) * np.sinh(r2) * np.exp(1j * omega2)
    norm = np.sqrt(abs(c10) ** 2 + abs(c01) ** 2)
    if norm < 1e-12:
        raise ValueError("r1 = r2 = 0 leaves nothing to subtract from")
    coeffs = np.zeros((2, 2), dtype=complex)
    coeffs[1, 0] = c10 / norm
    coeffs[0, 1] = c01 / norm
    core = CoreState(coeffs=coeffs, rank=1)
    xi1 = r1 * np.exp(1j * omega1)
    xi2 = r2 * np.exp(1j * omega2)
    circuit = GaussianCircuit(squeeze=(xi1, xi2), loss=(eta, eta))
    psi, leakage = _lossless_state_from_core(core, circuit, cutoff)
    state = make_state(np.outer(psi, psi.conj()), trace_leakage=leakage,
                       check_psd=False)
    return apply_loss(state, eta, eta)
