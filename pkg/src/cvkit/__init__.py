"""cvkit: correlation-pattern entanglement detection for two-mode CV states.

Generates random bounded-stellar-rank states, computes their homodyne
correlation patterns and ground-truth entanglement labels (PPT and
first/second-order QFI witnesses), trains a from-scratch fully connected
classifier on the patterns, benchmarks it against MaxLik tomography at
matched finite sampling budgets, and embeds patterns/features with t-SNE.
"""

from .fock import (
    FockCutoff,
    GaussianCircuit,
    ModeOperators,
    TwoModeState,
    apply_loss,
    build_mode_operators,
    fidelity,
    gaussian_unitary,
    make_state,
    partial_transpose,
    root_fidelity,
    spectral,
    vacuum_state,
)
from .homodyne import (
    CorrelationPattern,
    HomodyneSampleSet,
    QuadGrid,
    joint_pdf,
    pattern_from_pdf,
    pattern_from_samples,
    quad_wavefunction,
    sample_all_channels,
    sample_quadratures,
)
from .stellar import (
    CoreState,
    GenerationRanges,
    photon_subtracted_state,
    random_core_state,
    stellar_rank_of_core,
    synthesize_random_state,
)
from .witness import (
    GeneratorSet,
    LabelVector,
    WitnessValues,
    generator_set,
    label_state,
    ppt_witness,
    qfi_quadratic_forms,
    qfi_witness,
)

__version__ = "0.1.0"
