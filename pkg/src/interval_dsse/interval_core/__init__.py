"""Outward-rounded interval arithmetic: scalars, vectors, matrices."""

from .scalar import (
    EMPTY,
    Interval,
    add,
    contains_point,
    div,
    intersect as intersect_scalar,
    is_subset,
    magnitude,
    midpoint,
    mul,
    neg,
    radius,
    sub,
    width,
)
from .arrays import (
    IntervalMatrix,
    IntervalVector,
    hausdorff,
    identity_minus,
    inf_norm,
    inf_norm_matrix,
    intersect,
    interval_matvec,
    interval_times_point_vector,
    point_times_interval_matrix,
    point_times_interval_vector,
)

__all__ = [
    "EMPTY", "Interval", "IntervalVector", "IntervalMatrix",
    "add", "sub", "mul", "div", "neg", "intersect", "intersect_scalar",
    "midpoint", "radius", "width", "magnitude", "contains_point", "is_subset",
    "inf_norm", "inf_norm_matrix", "hausdorff", "identity_minus",
    "point_times_interval_matrix", "point_times_interval_vector",
    "interval_times_point_vector", "interval_matvec",
]
