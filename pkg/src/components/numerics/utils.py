"""Numeric constants shared by the numerics package."""

GELU_COEFF = 0.044715
LAYER_NORM_EPS = 1e-5
MAX_COUNTER_VALUE = 2 ** 62

# Finite-difference checking
GRAD_CHECK_EPS = 1e-5
GRAD_CHECK_FLOOR = 1e-7

# Raw tensor files: one JSON header line, then little-endian bytes.
TENSOR_DTYPES = {
    "float64": "<f8",
    "float32": "<f4",
    "int64": "<i8",
    "int32": "<i4",
    "bool": "|u1",
}
