"""Continual multistep forecasting with change-point-routed model collections."""

__version__ = "0.1.0"

from driftcast.changepoint import ChangePointSet, PeltConfig, pelt, segment_of
from driftcast.hoeffding import HoeffdingTreeRegressor, TreeParams, hoeffding_epsilon
from driftcast.ingest import ColumnSchema, FeatureConfig, Instance, RawSeries
from driftcast.selection import ModelCollection, SchemaKind, SchemaState

__all__ = [
    "__version__",
    "ChangePointSet",
    "ColumnSchema",
    "FeatureConfig",
    "HoeffdingTreeRegressor",
    "Instance",
    "ModelCollection",
    "PeltConfig",
    "RawSeries",
    "SchemaKind",
    "SchemaState",
    "TreeParams",
    "hoeffding_epsilon",
    "pelt",
    "segment_of",
]
