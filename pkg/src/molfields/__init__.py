"""molfields: voxel RBF molecule fields, variance-preserving field diffusion,
molecular graph extraction, and molecule-set evaluation metrics."""

from .canon import CanonicalKey, canonical_key
from .diffusion import (
    Condition,
    forward_sample,
    guided_noise,
    posterior_params,
    predicted_u0,
    sample,
)
from .extract import (
    ExtractionConfig,
    ExtractionResult,
    candidate_bonds,
    extract_molecule,
    optimize_bond_amplitudes,
    peak_extract,
    refine_positions,
)
from .fingerprint import Fingerprint, fingerprint, tanimoto
from .grid import (
    FieldTensor,
    GridSpec,
    RbfParams,
    grid_default,
    load_fmgf,
    save_fmgf,
)
from .metrics import (
    MetricsReport,
    chirality_distribution,
    count_fidelity,
    evaluate_sets,
    mst,
    neutrality_validity_novelty,
    tv_counts,
    w1_bond_angles,
    w1_bond_lengths,
)
from .molecule import (
    Molecule,
    chirality_determinant,
    find_tetrahedral_centers,
    formal_neutrality,
    make_molecule,
    validity,
)
from .oracle import OracleDenoiser, oracle_predict_noise
from .orient import CanonicalFrame, canonical_orient
from .schedule import NoiseSchedule, build_schedule, cosine_alpha
from .sdf import SdfParseError, parse_sdf, parse_xyz, write_sdf
from .toydenoiser import ToyDenoiser, ToyNetConfig, ToyTrainConfig, train_toy_denoiser
from .voxelize import CoverageError, voxelize

__all__ = [name for name in dir() if not name.startswith("_")]
