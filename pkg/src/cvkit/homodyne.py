"""Joint quadrature statistics, pattern binning and homodyne sampling.

The joint density for a basis pair is the double Fock sum
P(v1, v2) = sum rho_{n1 n2; n1' n2'} <v1|n1><v2|n2><v1|n1'>*<v2|n2'>*
with <X|n> = H_n(X/sqrt 2) exp(-X^2/4) / ((2 pi)^(1/4) sqrt(2^n n!)) and
<P|n> = i^n times the same form.  Patterns are 4 x 24 x 24: per-bin medians
of the pdf on a 5 x 5 interior lattice (or histogram counts for sampled
data), each channel normalized to unit sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import TwoModeState

# channel order: (X1X2, X1P2, P1X2, P1P2)
CHANNEL_BASES: tuple[tuple[str, str], ...] = (
    ("x", "x"), ("x", "p"), ("p", "x"), ("p", "p"))
N_CHANNELS = len(CHANNEL_BASES)

PDF_CLAMP = 1e-8  # negatives beyond this signal a corrupt state


@dataclass(frozen=True)
class QuadGrid:
    """Pattern window, per-bin evaluation lattice, and sampling window."""

    lo: float = -6.0
    hi: float = 6.0
    bins: int = 24
    lattice: int = 5
    sample_lo: float = -8.0
    sample_hi: float = 8.0
    sample_cells: int = 320

    @property
    def bin_width(self) -> float:
        return (self.hi - self.lo) / self.bins

    def lattice_points(self) -> np.ndarray:
        """All bins x lattice evaluation points, ascending, strictly inside
        their bins."""
        w = self.bin_width
        edges = self.lo + w * np.arange(self.bins)
        offsets = w * (np.arange(self.lattice) + 0.5) / self.lattice
        return (edges[:, None] + offsets[None, :]).ravel()

    def sample_cell_width(self) -> float:
        return (self.sample_hi - self.sample_lo) / self.sample_cells

    def sample_centers(self) -> np.ndarray:
        w = self.sample_cell_width()
        return self.sample_lo + w * (np.arange(self.sample_cells) + 0.5)


DEFAULT_GRID = QuadGrid()


@dataclass(frozen=True)
class CorrelationPattern:
    """4 x bins x bins nonnegative array, each channel summing to 1.

    Axis 0 of a channel runs over mode-1 quadrature values (ascending) and
    axis 1 over mode-2 values, so swapping the state's modes transposes
    each channel and swaps channels 1 and 2.
    """

    channels: np.ndarray

    def __post_init__(self) -> None:
        ch = np.asarray(self.channels, dtype=float)
        if ch.ndim != 3 or ch.shape[0] != N_CHANNELS:
            raise ValueError(f"expected (4, b, b) channels, got {ch.shape}")
        if ch.min() < 0:
            raise ValueError(f"pattern has negative entry {ch.min():.3e}")
        sums = ch.sum(axis=(1, 2))
        if np.abs(sums - 1.0).max() > 1e-9:
            raise ValueError(f"channels not normalized: sums {sums}")
        ch.flags.writeable = False
        object.__setattr__(self, "channels", ch)

    def flat(self) -> np.ndarray:
        """Channel-major flattening to the network input vector."""
        return self.channels.ravel()


@dataclass(frozen=True)
class HomodyneSampleSet:
    """Per channel, an (N, 2) array of joint outcome pairs."""

    channels: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]


def wavefunction_table(n_max: int, values: np.ndarray, basis: str) -> np.ndarray:
    """<v|n> for n = 0..n_max at each value; shape (n_max+1, len(values)).

    Stable three-term recurrence on the normalized oscillator functions:
    f_{n+1} = v f_n / sqrt(n+1) - sqrt(n/(n+1)) f_{n-1}.
    """
    if basis not in ("x", "p"):
        raise ValueError(f"basis must be 'x' or 'p', got {basis!r}")
    v = np.atleast_1d(np.asarray(values, dtype=float))
    out = np.empty((n_max + 1, v.size), dtype=complex)
    f0 = np.exp(-v ** 2 / 4) / (2 * np.pi) ** 0.25
    out[0] = f0
    if n_max >= 1:
        out[1] = v * f0
    for n in range(1, n_max):
        out[n + 1] = (v * out[n] - np.sqrt(n) * out[n - 1]) / np.sqrt(n + 1)
    if basis == "p":
        out *= (1j ** np.arange(n_max + 1))[:, None]
    return out


def quad_wavefunction(n: int, value, basis: str = "x"):
    """<value|n> in the X or P eigenbasis (the P form carries i^n)."""
    v = np.asarray(value, dtype=float)
    if n < 0:
        raise ValueError("n must be >= 0")
    table = wavefunction_table(n, v.ravel(), basis)
    res = table[n].reshape(v.shape)
    return complex(res) if v.ndim == 0 else res


def _pdf_clamp(p: np.ndarray) -> np.ndarray:
    low = p.min()
    if low < -PDF_CLAMP:
        raise ValueError(f"joint pdf reached {low:.3e}; state is corrupt")
    return np.clip(p, 0.0, None)


def joint_pdf_grid(state: TwoModeState, channel: int, v1: np.ndarray,
                   v2: np.ndarray) -> np.ndarray:
    """Joint pdf on the product grid v1 x v2; shape (len(v1), len(v2))."""
    b1, b2 = CHANNEL_BASES[channel]
    n_max = state.d - 1
    w1 = wavefunction_table(n_max, np.asarray(v1, dtype=float), b1)
    w2 = wavefunction_table(n_max, np.asarray(v2, dtype=float), b2)
    m1 = np.einsum("ai,ci->iac", w1, w1.conj())
    m2 = np.einsum("bj,dj->jbd", w2, w2.conj())
    p = np.einsum("iac,abcd,jbd->ij", m1, state.rho4(), m2,
                  optimize=True).real
    return _pdf_clamp(p)


def joint_pdf(state: TwoModeState, channel: int, v1, v2):
    """Joint quadrature pdf at (v1, v2); broadcasts elementwise over arrays.

    channel indexes CHANNEL_BASES: 0 = X1X2, 1 = X1P2, 2 = P1X2, 3 = P1P2.
    """
    a1 = np.asarray(v1, dtype=float)
    a2 = np.asarray(v2, dtype=float)
    shape = np.broadcast_shapes(a1.shape, a2.shape)
    f1 = np.broadcast_to(a1, shape).ravel()
    f2 = np.broadcast_to(a2, shape).ravel()
    b1, b2 = CHANNEL_BASES[channel]
    n_max = state.d - 1
    w1 = wavefunction_table(n_max, f1, b1)
    w2 = wavefunction_table(n_max, f2, b2)
    m1 = np.einsum("ai,ci->iac", w1, w1.conj())
    m2 = np.einsum("bi,di->ibd", w2, w2.conj())
    p = np.einsum("iac,abcd,ibd->i", m1, state.rho4(), m2,
                  optimize=True).real
    p = _pdf_clamp(p).reshape(shape)
    return float(p) if p.ndim == 0 else p


def pattern_from_pdf(state: TwoModeState,
                     grid: QuadGrid = DEFAULT_GRID) -> CorrelationPattern:
    """Median-binned theoretical pattern: per bin, the median of the pdf on
    the lattice of interior points; channels normalized to unit sum."""
    pts = grid.lattice_points()
    b, l = grid.bins, grid.lattice
    channels = np.empty((N_CHANNELS, b, b))
    for c in range(N_CHANNELS):
        dense = joint_pdf_grid(state, c, pts, pts)
        med = np.median(dense.reshape(b, l, b, l), axis=(1, 3))
        channels[c] = med / med.sum()
    return CorrelationPattern(channels=channels)


def sample_quadratures(state: TwoModeState, channel: int, n_samples: int,
                       seed, grid: QuadGrid = DEFAULT_GRID) -> np.ndarray:
    """Monte Carlo joint homodyne outcomes for one channel; shape (N, 2).

    The pdf is discretized on the sampling lattice over the (wider) sample
    window, cells are drawn from the induced categorical distribution, and
    outcomes are jittered uniformly within their cell.
    """
    if n_samples < 0:
        raise ValueError("n_samples must be >= 0")
    if n_samples == 0:
        return np.empty((0, 2))
    rng = np.random.default_rng(seed)
    centers = grid.sample_centers()
    cell = grid.sample_cell_width()
    pdf = joint_pdf_grid(state, channel, centers, centers)
    total = pdf.sum()
    if total <= 0:
        raise ValueError("pdf vanishes on the whole sampling lattice")
    cdf = np.cumsum(pdf.ravel() / total)
    cdf[-1] = 1.0
    flat = np.searchsorted(cdf, rng.random(n_samples), side="right")
    i1, i2 = np.unravel_index(flat, pdf.shape)
    lo = grid.sample_lo
    v1 = lo + (i1 + rng.random(n_samples)) * cell
    v2 = lo + (i2 + rng.random(n_samples)) * cell
    return np.column_stack([v1, v2])


def sample_all_channels(state: TwoModeState, n_samples: int, seed,
                        grid: QuadGrid = DEFAULT_GRID) -> HomodyneSampleSet:
    """Sample every channel with an independent per-channel derived seed."""
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    children = ss.spawn(N_CHANNELS)
    return HomodyneSampleSet(channels=tuple(
        sample_quadratures(state, c, n_samples, children[c], grid)
        for c in range(N_CHANNELS)))


def pattern_from_samples(samples: HomodyneSampleSet,
                         grid: QuadGrid = DEFAULT_GRID) -> CorrelationPattern:
    """Histogram pattern from sampled outcomes; out-of-window points are
    discarded and each channel is normalized to unit sum."""
    b = grid.bins
    w = grid.bin_width
    channels = np.empty((N_CHANNELS, b, b))
    for c, pts in enumerate(samples.channels):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"channel {c}: expected (N, 2) outcomes")
        keep = np.all((pts >= grid.lo) & (pts < grid.hi), axis=1)
        kept = pts[keep]
        if kept.shape[0] == 0:
            raise ValueError(f"channel {c} has no samples inside the window")
        idx1 = ((kept[:, 0] - grid.lo) / w).astype(int)
        idx2 = ((kept[:, 1] - grid.lo) / w).astype(int)
        counts = np.zeros((b, b))
        np.add.at(counts, (idx1, idx2), 1.0)
        channels[c] = counts / counts.sum()
    return CorrelationPattern(channels=channels)
