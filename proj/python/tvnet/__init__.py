"""TV-L1 optical flow with a differentiable, trainable unrolled form."""

from ._core import (
    Forward,
    FormatError,
    InitMode,
    NumericalError,
    Params,
    SolverConfig,
    epe,
    evaluate,
    flow_energy,
    flow_to_color,
    forward,
    grad_check,
    read_config,
    read_flo,
    read_image,
    read_params,
    solve,
    synth_pair,
    train,
    write_flo,
    write_image,
    write_params,
)

__all__ = [
    "Forward",
    "FormatError",
    "InitMode",
    "NumericalError",
    "Params",
    "SolverConfig",
    "epe",
    "evaluate",
    "flow_energy",
    "flow_to_color",
    "forward",
    "grad_check",
    "read_config",
    "read_flo",
    "read_image",
    "read_params",
    "solve",
    "synth_pair",
    "train",
    "write_flo",
    "write_image",
    "write_params",
]
