"""Change detection in streams of attributed graphs via dissimilarity embedding."""

from .errors import (DegenerateGraphError, DegeneratePrototypesError, GeometryError,
                     GraphDriftError, GXLParseError, InsufficientSimulationsError,
                     InvalidConfigError, InvalidInputError, SchemaError, SizeLimitError)
from .graph_core import AttributedGraph, IdentifiedGraph, Schema
from .ged import CostModel, GraphDistance, bipartite_ged, exact_ged, lsap_solve
from .embedding import PrototypeSet, embed, embed_many, k_centres
from .detector import (BaselineModel, DetectorState, ThresholdTable, calibrate_thresholds,
                       cusum_step, default_offset, fit_baseline, run_detector, window_statistic)

__version__ = "0.1.0"
