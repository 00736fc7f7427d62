"""Binary dataset format (magic CVDS1).

Fixed-layout little-endian records keep 15k-state sets around 140 MB and
make byte-identical reproduction trivial.  A record stores everything
needed to rebuild the state (core + circuit parameters), the witness
values, the binary labels and the float32 pattern; density matrices are
never stored.  docs/formats.md documents the exact byte layout.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .fock import FockCutoff, GaussianCircuit
from .homodyne import CorrelationPattern
from .stellar import CoreState
from .witness import LabelVector, WitnessValues

DATASET_MAGIC = b"CVDS1"
DATASET_VERSION = 1
MAX_CORE_COEFFS = 6  # rank <= 2 simplex
_HEADER = struct.Struct("<5sHQHHH")  # magic, version, count, n_max, channels, bins


@dataclass(frozen=True)
class DatasetRecord:
    state_id: int
    core: CoreState
    circuit: GaussianCircuit
    witness_values: WitnessValues
    labels: LabelVector
    pattern: np.ndarray  # (4, bins, bins) float32


def _core_coeff_list(core: CoreState) -> list[complex]:
    """Simplex coefficients in lexicographic (n1, n2) order."""
    out = []
    for n1 in range(core.rank + 1):
        for n2 in range(core.rank + 1 - n1):
            out.append(complex(core.coeffs[n1, n2]))
    return out


def _core_from_coeffs(rank: int, coeffs: list[complex]) -> CoreState:
    arr = np.zeros((rank + 1, rank + 1), dtype=complex)
    it = iter(coeffs)
    for n1 in range(rank + 1):
        for n2 in range(rank + 1 - n1):
            arr[n1, n2] = next(it)
    arr.flags.writeable = False
    return CoreState(coeffs=arr, rank=rank)


def _pack_record(rec: DatasetRecord, bins: int) -> bytes:
    parts = [struct.pack("<Q", rec.state_id)]
    coeffs = _core_coeff_list(rec.core)
    parts.append(struct.pack("<BB", rec.core.rank, len(coeffs)))
    padded = coeffs + [0j] * (MAX_CORE_COEFFS - len(coeffs))
    for c in padded:
        parts.append(struct.pack("<dd", c.real, c.imag))
    circ = rec.circuit
    for bs in (circ.bs_in, circ.bs_out):
        flag = 0 if bs is None else 1
        val = 0j if bs is None else complex(bs)
        parts.append(struct.pack("<Bdd", flag, val.real, val.imag))
    for z in (*circ.squeeze, *circ.displace):
        z = complex(z)
        parts.append(struct.pack("<dd", z.real, z.imag))
    parts.append(struct.pack("<dd", *circ.loss))
    w = rec.witness_values
    parts.append(struct.pack("<ddd", w.ppt_min, w.qfi1, w.qfi2))
    parts.append(struct.pack("<BBB", rec.labels.e_ppt, rec.labels.e_qfi1,
                             rec.labels.e_qfi2))
    pattern = np.ascontiguousarray(rec.pattern, dtype="<f4")
    if pattern.shape != (4, bins, bins):
        raise ValueError(f"pattern shape {pattern.shape} != (4, {bins}, {bins})")
    parts.append(pattern.tobytes())
    return b"".join(parts)


def _unpack_record(buf: bytes, offset: int, bins: int) -> tuple[DatasetRecord, int]:
    (state_id,) = struct.unpack_from("<Q", buf, offset)
    offset += 8
    rank, n_coeffs = struct.unpack_from("<BB", buf, offset)
    offset += 2
    coeffs = []
    for i in range(MAX_CORE_COEFFS):
        re, im = struct.unpack_from("<dd", buf, offset)
        offset += 16
        if i < n_coeffs:
            coeffs.append(complex(re, im))
    bs_vals = []
    for _ in range(2):
        flag, re, im = struct.unpack_from("<Bdd", buf, offset)
        offset += 17
        bs_vals.append(complex(re, im) if flag else None)
    xi1r, xi1i, xi2r, xi2i, a1r, a1i, a2r, a2i = struct.unpack_from(
        "<8d", buf, offset)
    offset += 64
    eta1, eta2 = struct.unpack_from("<dd", buf, offset)
    offset += 16
    ppt, qfi1, qfi2 = struct.unpack_from("<ddd", buf, offset)
    offset += 24
    l1, l2, l3 = struct.unpack_from("<BBB", buf, offset)
    offset += 3
    n_pat = 4 * bins * bins
    pattern = np.frombuffer(buf, dtype="<f4", count=n_pat,
                            offset=offset).reshape(4, bins, bins).copy()
    offset += 4 * n_pat
    rec = DatasetRecord(
        state_id=state_id,
        core=_core_from_coeffs(rank, coeffs),
        circuit=GaussianCircuit(
            bs_in=bs_vals[0],
            squeeze=(complex(xi1r, xi1i), complex(xi2r, xi2i)),
            displace=(complex(a1r, a1i), complex(a2r, a2i)),
            bs_out=bs_vals[1],
            loss=(eta1, eta2)),
        witness_values=WitnessValues(ppt_min=ppt, qfi1=qfi1, qfi2=qfi2),
        labels=LabelVector(l1, l2, l3),
        pattern=pattern,
    )
    return rec, offset


def write_dataset(path, records: list[DatasetRecord], cutoff: FockCutoff,
                  bins: int = 24) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DATASET_MAGIC, DATASET_VERSION, len(records),
                              cutoff.n_max, 4, bins))
        for rec in records:
            fh.write(_pack_record(rec, bins))


def read_dataset(path) -> tuple[list[DatasetRecord], dict]:
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _HEADER.size:
        raise ValueError("dataset file truncated before header")
    magic, version, count, n_max, channels, bins = _HEADER.unpack_from(buf, 0)
    if magic != DATASET_MAGIC:
        raise ValueError(f"bad dataset magic {magic!r}")
    if version != DATASET_VERSION:
        raise ValueError(f"unsupported dataset version {version}")
    offset = _HEADER.size
    records = []
    for _ in range(count):
        rec, offset = _unpack_record(buf, offset, bins)
        records.append(rec)
    if offset != len(buf):
        raise ValueError(f"dataset has {len(buf) - offset} trailing bytes")
    meta = {"count": count, "n_max": n_max, "channels": channels, "bins": bins}
    return records, meta


def training_pairs(records: list[DatasetRecord]) -> list[tuple[np.ndarray, LabelVector]]:
    """(flattened float pattern, labels) pairs for the classifier."""
    return [(rec.pattern.astype(float).ravel(), rec.labels) for rec in records]


def record_pattern(rec: DatasetRecord) -> CorrelationPattern:
    """Re-wrap the stored float32 pattern (renormalized for the f32
    rounding) as a CorrelationPattern."""
    ch = rec.pattern.astype(float)
    ch = ch / ch.sum(axis=(1, 2), keepdims=True)
    return CorrelationPattern(channels=ch)
