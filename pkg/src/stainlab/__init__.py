"""stainlab: singleplex reconstruction from triplex brightfield IHC.

Physics-grounded color tools (Beer-Lambert optical density, linear stain
deconvolution, NMF), a synthetic triplex/singleplex dataset generator with
exact ground truth, an unpaired image-translation trainer built on a small
numpy autodiff engine, evaluation metrics, a CLI, and a blinded pathology
review service.
"""

from .colorspace import (
    DEFAULT_BACKGROUND,
    GREEN,
    HEMATOXYLIN,
    OD_MAX,
    QM_DABSYL,
    TAMRA,
    ConcentrationMap,
    StainMatrix,
    StainVector,
    compose,
    compose_od,
    default_stain_matrix,
    normalize_stain_vector,
    od_to_rgb,
    rgb_to_od,
)
from .errors import (
    DegenerateInputError,
    IllConditionedError,
    InvalidArgumentError,
    NotReadyError,
    ShapeError,
    StainlabError,
    TrainingDivergedError,
    UnsupportedStainCountError,
)
from .unmix import (
    BACKGROUND_OD,
    NmfConfig,
    NmfResult,
    deconvolve_linear,
    nmf_unmix,
    reconstruct_singleplex,
)
from .tissue import (
    MARKER_STAINS,
    MARKERS,
    Cell,
    CellLayout,
    FovSpec,
    Patch,
    PatchSet,
    build_dataset,
    extract_patches,
    generate_layout,
    load_dataset,
    render,
    split_counts,
)
from .evaluate import (
    HIST_BINS,
    HIST_RANGE,
    REFERENCE_SCORES,
    OdHistogram,
    consensus_report,
    histogram_correlation,
    od_histogram,
    pooled_histogram,
    score_curves,
    translation_score,
)

__version__ = "0.1.0"

__all__ = [
    "BACKGROUND_OD",
    "Cell",
    "CellLayout",
    "ConcentrationMap",
    "DEFAULT_BACKGROUND",
    "DegenerateInputError",
    "FovSpec",
    "GREEN",
    "HEMATOXYLIN",
    "HIST_BINS",
    "HIST_RANGE",
    "IllConditionedError",
    "InvalidArgumentError",
    "MARKERS",
    "MARKER_STAINS",
    "NmfConfig",
    "NmfResult",
    "NotReadyError",
    "OD_MAX",
    "OdHistogram",
    "Patch",
    "PatchSet",
    "QM_DABSYL",
    "REFERENCE_SCORES",
    "ShapeError",
    "StainMatrix",
    "StainVector",
    "StainlabError",
    "TAMRA",
    "TrainingDivergedError",
    "UnsupportedStainCountError",
    "build_dataset",
    "compose",
    "compose_od",
    "consensus_report",
    "deconvolve_linear",
    "default_stain_matrix",
    "extract_patches",
    "generate_layout",
    "histogram_correlation",
    "load_dataset",
    "nmf_unmix",
    "normalize_stain_vector",
    "od_histogram",
    "od_to_rgb",
    "pooled_histogram",
    "reconstruct_singleplex",
    "render",
    "rgb_to_od",
    "score_curves",
    "split_counts",
    "translation_score",
]
