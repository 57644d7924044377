"""Chemical-state mapping for TXM-XANES image cubes.

Robust spectral unmixing under a per-pixel-scaled linear mixing model
(multi-block ADMM with TV or plug-and-play priors), edge-50 and LCF
baselines, VCA endmember extraction, a synthetic scene generator,
quality metrics, bit-exact file formats and a batch CLI.
"""

from .baselines import (
    Edge50References,
    EdgeWindows,
    edge50_energy,
    edge50_map,
    edge50_reference_energies,
    fcls_solve,
    lcf_unmix,
    normalize_spectra,
    project_simplex_columns,
)
from .cubeio import (
    read_cube,
    read_dictionary_csv,
    render_pgm,
    write_cube,
    write_dictionary_csv,
)
from .datatypes import (
    Dictionary,
    EnergyGrid,
    GradientPair,
    ImageGeometry,
    PhaseMap,
    ScalingField,
    SpectralCube,
)
from .denoisers import DenoiserSpec, available_denoisers, denoise, register_denoiser
from .errors import (
    BadMagicError,
    CubeFormatError,
    DenoiserError,
    DimensionError,
    HeaderMismatchError,
    TruncatedFileError,
    VcaRankError,
    XanesUnmixError,
)
from .estimators import Edge50Mapper, LcfUnmixer, RobustUnmixer, VcaExtractor
from .operators import (
    CgResult,
    cg_solve,
    divergence_adjoint,
    forward_difference,
    laplacian_apply,
    mix_forward,
)
from .simulate import (
    SceneSpec,
    SpectrumModel,
    build_scene,
    default_grid,
    default_states,
    psnr,
    rmse,
    ssim,
    synth_spectrum,
)
from .solver import (
    DiagnosticsRecord,
    KktResiduals,
    SolverConfig,
    SolverResult,
    SolverState,
    kkt_residuals,
    run,
    shrink,
    solve,
    write_diagnostics_csv,
)
from .vca import VcaConfig, spectral_angle, vca_extract

__version__ = "0.1.0"

__all__ = [
    "BadMagicError",
    "CgResult",
    "CubeFormatError",
    "DenoiserError",
    "DenoiserSpec",
    "DiagnosticsRecord",
    "Dictionary",
    "DimensionError",
    "Edge50Mapper",
    "Edge50References",
    "EdgeWindows",
    "EnergyGrid",
    "GradientPair",
    "HeaderMismatchError",
    "ImageGeometry",
    "KktResiduals",
    "LcfUnmixer",
    "PhaseMap",
    "RobustUnmixer",
    "ScalingField",
    "SceneSpec",
    "SolverConfig",
    "SolverResult",
    "SolverState",
    "SpectralCube",
    "SpectrumModel",
    "TruncatedFileError",
    "VcaConfig",
    "VcaExtractor",
    "VcaRankError",
    "XanesUnmixError",
    "available_denoisers",
    "build_scene",
    "cg_solve",
    "default_grid",
    "default_states",
    "denoise",
    "divergence_adjoint",
    "edge50_energy",
    "edge50_map",
    "edge50_reference_energies",
    "fcls_solve",
    "forward_difference",
    "kkt_residuals",
    "laplacian_apply",
    "lcf_unmix",
    "mix_forward",
    "normalize_spectra",
    "project_simplex_columns",
    "psnr",
    "read_cube",
    "read_dictionary_csv",
    "register_denoiser",
    "render_pgm",
    "rmse",
    "run",
    "shrink",
    "solve",
    "spectral_angle",
    "ssim",
    "synth_spectrum",
    "vca_extract",
    "write_cube",
    "write_dictionary_csv",
    "write_diagnostics_csv",
]
