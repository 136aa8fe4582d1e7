"""Log-depth state-preparation and memory-oracle circuit compiler with a sparse simulator."""

from .block import (
    BlockEncodingArtifact,
    ProductTermHamiltonian,
    QubitizationEstimate,
    assemble_block_encoding,
    compile_prepare_G,
    estimate_qubitization,
    extract_block,
    parse_hamiltonian,
)
from .circuit import Circuit, CircuitBuilder, CouplingGraph, Gate, QubitRegistry, append, inverse
from .cliffordt import (
    CliffordTWord,
    ErrorBudget,
    approx_single_qubit,
    compile_dense_cliffordT,
    inverse_word,
    lower_partial_swap,
    lower_phase_pair,
)
from .dense import DenseStateSpec, compile_dense, compute_angle_tree
from .memory import (
    ProductUnitaryFunction,
    SparseBooleanFunction,
    compile_pum,
    compile_qram_binary,
    compile_qram_continuous,
    compile_sbm,
)
from .qcf import emit_text, parse_text
from .sim import SparseState, extract_logical, fidelity, run_with_measurements, simulate
from .sparse import SparseStateSpec, compile_sparse, truncate_to_sparse
from .teleport import expand_teleported_cnot
