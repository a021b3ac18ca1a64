"""Weighted-MSE weight quantization toolkit.

SIC/GPTQ/WaterSIC encoders over integer product codebooks, waterfilling and
random-codebook benchmarks, and a bit-exact container codec. The heavy
lifting lives in the C++ extension module ``wquant._core``.
"""

from ._core import (
    InputError,
    NumericalError,
    QuantizedWeights,
    alpha_for_rate,
    am_gm_rate_gap,
    approx_chol_diag_rotated,
    cholesky_upper,
    clipped_codebook_quantize,
    cvp_exact,
    d_high_rate,
    d_iso,
    d_random_codebook,
    decode_container,
    dequantize,
    elem_sym_log,
    encode_container,
    entropy_coded_rd,
    entropy_rate,
    gaussian_matrix,
    gptq_quantize,
    high_rate_filters,
    optimal_shrinkage,
    predict_gptq,
    predict_watersic,
    random_codebook_for_distortion,
    random_codebook_for_rate,
    random_orthogonal,
    rate_for_alpha,
    rate_report,
    rect_rate,
    rotate_covariance,
    scalar_grid_waterfill,
    shaped_lattice_rd,
    sic,
    sym_eigen,
    synth_covariance,
    synth_spectrum,
    waterfill_for_distortion,
    waterfill_for_rate,
    waterfill_from_tau,
    watersic_quantize,
    wmse_distortion,
    zador_bound,
)

__all__ = [
    "InputError",
    "NumericalError",
    "QuantizedWeights",
    "alpha_for_rate",
    "am_gm_rate_gap",
    "approx_chol_diag_rotated",
    "cholesky_upper",
    "clipped_codebook_quantize",
    "cvp_exact",
    "d_high_rate",
    "d_iso",
    "d_random_codebook",
    "decode_container",
    "dequantize",
    "elem_sym_log",
    "encode_container",
    "entropy_coded_rd",
    "entropy_rate",
    "gaussian_matrix",
    "gptq_quantize",
    "high_rate_filters",
    "optimal_shrinkage",
    "predict_gptq",
    "predict_watersic",
    "random_codebook_for_distortion",
    "random_codebook_for_rate",
    "random_orthogonal",
    "rate_for_alpha",
    "rate_report",
    "rect_rate",
    "rotate_covariance",
    "scalar_grid_waterfill",
    "shaped_lattice_rd",
    "sic",
    "sym_eigen",
    "synth_covariance",
    "synth_spectrum",
    "waterfill_for_distortion",
    "waterfill_for_rate",
    "waterfill_from_tau",
    "watersic_quantize",
    "wmse_distortion",
    "zador_bound",
]
