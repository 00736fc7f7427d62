"""Ground-truth entanglement labels.

Three witnesses per state: the PPT minimum-eigenvalue witness
-lambda_min(rho^T2), and the metrological witness
E = max_n n^T (F - 4 Gamma) n over unit coefficient vectors, where F is
the quantum-Fisher-information matrix of the local generator set and
Gamma the block-diagonal matrix of local (co)variances.  Labels apply the
cutoffs 1e-3 (PPT) and 1e-8 (QFI).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import (
    FockCutoff,
    TwoModeState,
    build_mode_operators,
    partial_trace,
    partial_transpose,
    spectral,
)

PPT_CUTOFF = 1e-3
QFI_CUTOFF = 1e-8
QFI_SPECTRAL_FLOOR = 1e-10


@dataclass(frozen=True)
class GeneratorSet:
    """Per-mode Hermitian generators: (x, p) at order 1, plus
    (x^2, p^2, (xp+px)/2) at order 2."""

    order: int
    operators: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class WitnessValues:
    ppt_min: float
    qfi1: float
    qfi2: float


@dataclass(frozen=True)
class LabelVector:
    e_ppt: int
    e_qfi1: int
    e_qfi2: int

    def as_array(self) -> np.ndarray:
        return np.array([self.e_ppt, self.e_qfi1, self.e_qfi2], dtype=float)

    @staticmethod
    def from_array(arr) -> "LabelVector":
        a = np.asarray(arr)
        return LabelVector(int(a[0]), int(a[1]), int(a[2]))


def generator_set(order: int, cutoff: FockCutoff) -> GeneratorSet:
    if order not in (1, 2):
        raise ValueError(f"generator order must be 1 or 2, got {order}")
    ops = build_mode_operators(cutoff)
    if order == 1:
        mats = (ops.x, ops.p)
    else:
        mats = (ops.x, ops.p, ops.x2, ops.p2, ops.sym_xp)
    return GeneratorSet(order=order, operators=mats)


def ppt_witness(state: TwoModeState) -> float:
    """-lambda_min of the partial transpose on mode 2; > 1e-3 flags
    entanglement."""
    evals = np.linalg.eigvalsh(partial_transpose(state, mode=2))
    return float(-evals[0])


def qfi_quadratic_forms(state: TwoModeState, gens: GeneratorSet,
                        spectral_data: tuple[np.ndarray, np.ndarray] | None = None,
                        ) -> tuple[np.ndarray, np.ndarray]:
    """QFI matrix F and local-variance matrix Gamma for the 2k mode-local
    generators (mode-1 block first).

    F_ab = 2 sum_{i,j} (l_i - l_j)^2 / (l_i + l_j) Re(<i|H_a|j><j|H_b|i>)
    over eigenpairs with l_i + l_j above the spectral floor; Gamma is
    block diagonal with per-mode symmetrized covariances.
    """
    d = state.d
    evals, evecs = spectral_data if spectral_data is not None else spectral(state)
    k = len(gens.operators)
    eye = np.eye(d)

    rotated = np.empty((2 * k, d * d, d * d), dtype=complex)
    vdag = evecs.conj().T
    for a, h in enumerate(gens.operators):
        rotated[a] = vdag @ np.kron(h, eye) @ evecs
        rotated[k + a] = vdag @ np.kron(eye, h) @ evecs

    lsum = evals[:, None] + evals[None, :]
    ldiff = evals[:, None] - evals[None, :]
    weight = np.where(lsum > QFI_SPECTRAL_FLOOR, ldiff ** 2 / np.where(
        lsum > QFI_SPECTRAL_FLOOR, lsum, 1.0), 0.0)
    flat = rotated.reshape(2 * k, -1)
    f = 2.0 * ((flat * weight.ravel()) @ flat.conj().T).real
    f = (f + f.T) / 2

    gamma = np.zeros((2 * k, 2 * k))
    for mode in (1, 2):
        red = partial_trace(state, mode)
        means = np.array([np.trace(red @ h).real for h in gens.operators])
        block = np.empty((k, k))
        for a, ha in enumerate(gens.operators):
            for b, hb in enumerate(gens.operators):
                block[a, b] = (0.5 * np.trace(red @ (ha @ hb + hb @ ha)).real
                               - means[a] * means[b])
        s = (mode - 1) * k
        gamma[s:s + k, s:s + k] = (block + block.T) / 2
    return f, gamma


def qfi_witness(state: TwoModeState, gens: GeneratorSet,
                spectral_data: tuple[np.ndarray, np.ndarray] | None = None,
                ) -> float:
    """Top eigenvalue of F - 4 Gamma: the metrological witness maximized
    over unit-norm generator combinations; > 1e-8 flags entanglement."""
    f, gamma = qfi_quadratic_forms(state, gens, spectral_data)
    return float(np.linalg.eigvalsh(f - 4.0 * gamma)[-1])


def label_state(state: TwoModeState) -> tuple[WitnessValues, LabelVector]:
    """All three witnesses plus their thresholded binary labels."""
    cutoff = state.cutoff
    spec = spectral(state)
    values = WitnessValues(
        ppt_min=ppt_witness(state),
        qfi1=qfi_witness(state, generator_set(1, cutoff), spec),
        qfi2=qfi_witness(state, generator_set(2, cutoff), spec),
    )
    labels = LabelVector(
        e_ppt=int(values.ppt_min > PPT_CUTOFF),
        e_qfi1=int(values.qfi1 > QFI_CUTOFF),
        e_qfi2=int(values.qfi2 > QFI_CUTOFF),
    )
    return values, labels
