"""Equal-probability action grid codec with egocentric 3D position features.

Robot delta actions (x, y, z, roll, pitch, yaw, grip) are normalized to
[-1, 1], translations converted to polar form, and every axis split into bins
of equal probability mass under a fitted Gaussian. Each step encodes to 3
tokens from one flat vocabulary. Grids refit on new data can re-initialize
their token embeddings by trilinear interpolation over the old grid.
"""

from .adapt import (AdaptationPlan, EmbeddingTable, TokenPlan, adapt_embeddings,
                    trilinear_weights)
from .artifact import (ArtifactError, GridArtifact, dumps_grid_artifact,
                       file_sha256, loads_grid_artifact, read_embedding_table,
                       read_grid_artifact, write_embedding_table,
                       write_grid_artifact)
from .ego3d import (CameraIntrinsics, MlpWeights, PatchEncoding, PointMap,
                    back_project, fuse_features, mlp_forward, patch_average,
                    sinusoidal_encode)
from .gaussian import gaussian_cdf, gaussian_pdf, gaussian_ppf, truncated_mean
from .grid import (ActionGrid, AxisPartition, GridSpec, QuantizationReport,
                   TokenTriple, build_action_grid, build_axis_partition,
                   decode_tokens, delinearize_rot, delinearize_trans, digitize,
                   encode_action, linearize_rot, linearize_trans,
                   quantization_report, validate_tokens)
from .kernels import BACKEND as KERNEL_BACKEND
from .kernels import decode_batch, encode_batch
from .stats import (ActionSample, DatasetError, GaussianParams,
                    NormalizationSpec, PolarTranslation, cartesian_to_polar,
                    compute_normalizer, denormalize, denormalize_batch,
                    fit_gaussians, load_dataset, normalize, normalize_batch,
                    polar_to_cartesian)

__version__ = "0.1.0"
