"""Maximum-likelihood tomography from binned homodyne samples.

The measured effects discretize the four joint-quadrature channels onto
the pattern grid: per bin, Pi = sum over the interior lattice of
w |v1><v1| (x) |v2><v2| with w = bin area / lattice^2.  Reconstruction is
the iterative R rho R update with R = sum_j (f_j / p_j) Pi_j over all
4 x 24 x 24 bins.  Only the four x/p basis pairs are measured, which is
not informationally complete; the coverage defect is exposed rather than
patched, since the plateau it causes is part of the baseline's behavior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import FockCutoff, TwoModeState, make_state
from .homodyne import (
    CHANNEL_BASES,
    DEFAULT_GRID,
    HomodyneSampleSet,
    N_CHANNELS,
    QuadGrid,
    wavefunction_table,
)
from .witness import LabelVector, label_state

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class BinPovm:
    """Binned quadrature effects in factored per-axis form.

    axis_effects maps basis -> (bins, d, d) stacks E_b = sum_lattice
    |v><v|; the full two-mode effect for channel c and bins (b1, b2) is
    weight * E_b1^(basis1) (x) E_b2^(basis2).
    """

    axis_effects: dict[str, np.ndarray]
    weight: float
    grid: QuadGrid

    def effect(self, channel: int, b1: int, b2: int) -> np.ndarray:
        """Materialize one d^2 x d^2 effect (test and inspection helper)."""
        basis1, basis2 = CHANNEL_BASES[channel]
        return self.weight * np.kron(self.axis_effects[basis1][b1],
                                     self.axis_effects[basis2][b2])

    def channel_probabilities(self, state: TwoModeState,
                              channel: int) -> np.ndarray:
        """Tr(rho Pi) for every bin of one channel; shape (bins, bins)."""
        basis1, basis2 = CHANNEL_BASES[channel]
        e1 = self.axis_effects[basis1]
        e2 = self.axis_effects[basis2]
        p = np.einsum("abcd,uca,vdb->uv", state.rho4(), e1, e2,
                      optimize=True).real
        return self.weight * p

    def coverage(self, channel: int) -> np.ndarray:
        """Sum of all effects of one channel; deviation from the identity
        is the coverage defect of the finite window."""
        basis1, basis2 = CHANNEL_BASES[channel]
        return self.weight * np.kron(self.axis_effects[basis1].sum(axis=0),
                                     self.axis_effects[basis2].sum(axis=0))


def build_bin_povm(cutoff: FockCutoff, grid: QuadGrid = DEFAULT_GRID) -> BinPovm:
    """Effects on the same per-bin lattice used for pattern binning."""
    pts = grid.lattice_points()
    b, l = grid.bins, grid.lattice
    axis_effects = {}
    for basis in ("x", "p"):
        table = wavefunction_table(cutoff.n_max, pts, basis)
        resh = table.reshape(cutoff.d, b, l)
        # E_b[m, n] = sum_l <m|v_l><v_l|n> = sum_l psi_m(v_l)* psi_n(v_l)
        axis_effects[basis] = np.einsum("mbl,nbl->bmn", resh.conj(), resh)
    weight = grid.bin_width ** 2 / l ** 2
    return BinPovm(axis_effects=axis_effects, weight=weight, grid=grid)


def bin_counts(samples: HomodyneSampleSet,
               grid: QuadGrid = DEFAULT_GRID) -> np.ndarray:
    """Raw per-bin counts (4, bins, bins); out-of-window outcomes dropped."""
    b = grid.bins
    w = grid.bin_width
    counts = np.zeros((N_CHANNELS, b, b))
    for c, pts in enumerate(samples.channels):
        pts = np.asarray(pts, dtype=float)
        if pts.shape[0] == 0:
            continue
        keep = np.all((pts >= grid.lo) & (pts < grid.hi), axis=1)
        kept = pts[keep]
        idx1 = ((kept[:, 0] - grid.lo) / w).astype(int)
        idx2 = ((kept[:, 1] - grid.lo) / w).astype(int)
        np.add.at(counts[c], (idx1, idx2), 1.0)
    return counts


def reconstruct(samples: HomodyneSampleSet, cutoff: FockCutoff,
                iterations: int = 20, grid: QuadGrid = DEFAULT_GRID,
                return_loglik: bool = False):
    """Iterate rho <- N[R rho R] from the maximally mixed state.

    Frequencies are relative to the total kept count over all channels;
    empty bins are skipped and bin probabilities are floored at 1e-12.
    Returns the reconstructed TwoModeState, optionally with the
    log-likelihood sequence (initial iterate first).
    """
    povm = build_bin_povm(cutoff, grid)
    counts = bin_counts(samples, grid)
    total = counts.sum()
    if total <= 0:
        raise ValueError("no samples fall inside the measurement window")
    freqs = counts / total

    d = cutoff.d
    rho = np.eye(d * d, dtype=complex) / (d * d)
    logliks = []
    for _ in range(iterations):
        state = make_state(rho, check_psd=False)
        probs = np.stack([povm.channel_probabilities(state, c)
                          for c in range(N_CHANNELS)])
        probs = np.clip(probs, PROB_FLOOR, None)
        occupied = freqs > 0
        logliks.append(float((freqs[occupied] * np.log(probs[occupied])).sum()))

        coef = np.where(occupied, freqs / probs, 0.0)
        r4 = np.zeros((d, d, d, d), dtype=complex)
        for c in range(N_CHANNELS):
            basis1, basis2 = CHANNEL_BASES[c]
            e1 = povm.axis_effects[basis1]
            e2 = povm.axis_effects[basis2]
            r4 += np.einsum("uv,uac,vbd->abcd", coef[c], e1, e2,
                            optimize=True)
        r = povm.weight * r4.reshape(d * d, d * d)
        rho = r @ rho @ r
        rho = (rho + rho.conj().T) / 2
        rho /= np.trace(rho).real

    final = make_state(rho, check_psd=False)
    if return_loglik:
        probs = np.stack([povm.channel_probabilities(final, c)
                          for c in range(N_CHANNELS)])
        probs = np.clip(probs, PROB_FLOOR, None)
        occupied = freqs > 0
        logliks.append(float((freqs[occupied] * np.log(probs[occupied])).sum()))
        return final, logliks
    return final


def label_reconstruction(samples: HomodyneSampleSet, cutoff: FockCutoff,
                         iterations: int = 20,
                         grid: QuadGrid = DEFAULT_GRID) -> LabelVector:
    """Reconstruct, then apply the witness labels to the estimate."""
    state = reconstruct(samples, cutoff, iterations, grid)
    _, labels = label_state(state)
    return labels
