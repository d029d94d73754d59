"""Approximate lesion localization in dermoscopy images.

Black frame removal, a fused ensemble of histogram thresholds on the blue
channel, bounding box computation and expansion, plus the evaluation tools
to score boxes against annotated borders.
"""

from .errors import (DegenerateCurve, DegenerateFit, DegenerateHistogram, DimensionMismatch,
                     EmptyMask, FrameConsumesImage, LesionLocusError, ManifestError, ParseError)
from .frame import CropRect, FrameParams, remove_black_frame
from .fusion import FusionParams, WeightTables, build_weight_tables, fuse, fuse_initial, fuse_refine
from .imaging import (BoundingBox, binarize, connected_components, extract_blue_channel,
                      histogram, lightness)
from .localization import (BoxPolicy, ExpansionSpec, LocalizationResult, LocalizeConfig,
                           bounding_box, expand_adaptive, expand_nonadaptive, localize)
from .thresholding import (EnsembleSpec, ThresholdMethod, ThresholdResult, compute_ensemble,
                           huang_wang, kapur, li_tam, otsu, sahoo, yen)

__version__ = "0.1.0"
