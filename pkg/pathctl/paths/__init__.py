from pathctl.paths.core import (
    PathPair,
    SampledPath,
    bump,
    brownian_path,
    concat_control,
    flat_extend,
    lambda_metric,
    read_path_csv,
    restrict,
    subsample,
    substitute_last,
    sup_norm,
    value_at,
    values_at,
    write_path_csv,
)
