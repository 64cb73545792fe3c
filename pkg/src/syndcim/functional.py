"""Bit-accurate golden model of the macro datapath.

Activations stream LSB first, one bit per cycle.  Every column forms the
partial sum of (input bit AND stored weight bit) over its rows, and the S&A
accumulates ``partial << b``.  For signed inputs the MSB cycle subtracts.
Multi-bit weights are bit-sliced across adjacent columns and fused stage by
stage.  FP activations are first aligned to integers that share one exponent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .spec_model import COMPANION_INT, PrecisionFormat


class NonFiniteInput(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class BadGrouping(ValueError):
    pass


# -- floating-point codes --------------------------------------------------------------


def fp_fields(code: int, fmt: PrecisionFormat) -> tuple[int, int, int]:
    """Split an encoded value into (sign, exponent field, mantissa field)."""
    m = fmt.mantissa_bits
    e = fmt.exponent_bits
    code = int(code)
    if not 0 <= code < (1 << fmt.total_bits):
        raise ValueError(f"{code:#x} is not a {fmt.name} code")
    return code >> (e + m), (code >> m) & ((1 << e) - 1), code & ((1 << m) - 1)


def is_finite_code(code: int, fmt: PrecisionFormat) -> bool:
    _, e, m = fp_fields(code, fmt)
    emax = (1 << fmt.exponent_bits) - 1
    if fmt.name == "FP4":
        return True  # saturating, every code is a number
    if fmt.name == "FP8":
        return not (e == emax and m == (1 << fmt.mantissa_bits) - 1)
    return e != emax


def effective_exponent(e_field: int) -> int:
    # subnormals share the exponent of the smallest normal
    return max(e_field, 1)


def fp_value(code: int, fmt: PrecisionFormat) -> Fraction:
    """Exact rational value of an encoded FP number."""
    if not is_finite_code(code, fmt):
        raise NonFiniteInput(f"{fmt.name} code {code:#x} is NaN or infinite")
    s, e, m = fp_fields(code, fmt)
    sig = ((1 if e else 0) << fmt.mantissa_bits) | m
    v = Fraction(sig) * Fraction(2) ** (effective_exponent(e) - fmt.bias - fmt.mantissa_bits)
    return -v if s else v


def finite_codes(fmt: PrecisionFormat) -> list[int]:
    return [c for c in range(1 << fmt.total_bits) if is_finite_code(c, fmt)]


def align_fp_to_int(values, fmt: PrecisionFormat, align_width: int | None = None) -> tuple[int, list[int]]:
    """Align FP codes to signed integers sharing the largest exponent.

    Returns ``(E, ints)`` where ``E`` is the largest effective (biased)
    exponent field.  Each magnitude keeps ``align_width`` bits: hidden bit,
    mantissa and guard bits, shifted right by the exponent gap with the
    shifted-out bits dropped.  ``ints[i] * 2**scale_exponent(E, ...)``
    approximates the value from below in magnitude.
    """
    aw = fmt.align_width if align_width is None else int(align_width)
    if aw < fmt.mantissa_bits + 1:
        raise ValueError(f"align_width {aw} cannot hold the {fmt.mantissa_bits + 1}-bit significand")
    fields = []
    for code in values:
        if not is_finite_code(code, fmt):
            raise NonFiniteInput(f"{fmt.name} code {int(code):#x} is NaN or infinite")
        fields.append(fp_fields(code, fmt))
    if not fields:
        raise DimensionMismatch("no values to align")
    E = max(effective_exponent(e) for _, e, _ in fields)
    guard = aw - fmt.mantissa_bits - 1
    out = []
    for s, e, m in fields:
        sig = (((1 if e else 0) << fmt.mantissa_bits) | m) << guard
        mag = sig >> (E - effective_exponent(e))
        out.append(-mag if s else mag)
    return E, out


def scale_exponent(E: int, fmt: PrecisionFormat, align_width: int | None = None) -> int:
    """Power of two carried by one LSB of an aligned integer."""
    aw = fmt.align_width if align_width is None else align_width
    return E - fmt.bias - aw + 1


# -- weights and state ---------------------------------------------------------------------


def weight_format(precision: PrecisionFormat) -> PrecisionFormat:
    return COMPANION_INT[precision.name] if precision.is_float else precision


def int_range(fmt: PrecisionFormat) -> tuple[int, int]:
    """Inclusive integer range of a (companion) integer format."""
    n = fmt.total_bits
    if not fmt.signed:
        return 0, (1 << n) - 1
    return -(1 << (n - 1)), (1 << (n - 1)) - 1


@dataclass
class MacroState:
    """Stored weight bits plus the S&A and fusion registers of one macro."""

    height: int
    width: int
    mcr: int = 1
    weights: np.ndarray = None  # [mcr][height][width] bits
    sel: int = 0
    acc: list = field(default_factory=list)
    ofu: list = field(default_factory=list)
    pipeline_depth: int = 0

    def __post_init__(self):
        if self.weights is None:
            self.weights = np.zeros((self.mcr, self.height, self.width), dtype=np.uint8)
        if self.weights.shape != (self.mcr, self.height, self.width):
            raise DimensionMismatch(f"weight array shape {self.weights.shape} != {(self.mcr, self.height, self.width)}")

    def load_weights(self, values, precision: PrecisionFormat, weight_set: int = 0) -> None:
        """Store integer weights ``values[row][group]`` bit-sliced over adjacent columns."""
        wf = weight_format(precision)
        wb = wf.total_bits
        vals = np.asarray(values, dtype=np.int64)
        groups = self.width // wb
        if vals.shape != (self.height, groups):
            raise DimensionMismatch(f"expected weights of shape {(self.height, groups)}, got {vals.shape}")
        lo, hi = int_range(wf)
        if vals.size and (vals.min() < lo or vals.max() > hi):
            raise ValueError(f"weights outside the {wf.name} range")
        raw = vals & ((1 << wb) - 1)
        for j in range(wb):
            self.weights[weight_set, :, j::wb][:, :groups] = (raw >> j) & 1

    def weight_values(self, precision: PrecisionFormat, weight_set: int | None = None) -> np.ndarray:
        wf = weight_format(precision)
        wb = wf.total_bits
        bits = self.weights[self.sel if weight_set is None else weight_set].astype(np.int64)
        groups = self.width // wb
        v = np.zeros((self.height, groups), dtype=np.int64)
        for j in range(wb):
            v += bits[:, j::wb][:, :groups] << j
        if wf.signed and wb > 1:
            v = np.where(v >= 1 << (wb - 1), v - (1 << wb), v)
        return v


# -- arithmetic ------------------------------------------------------------------------------


def output_fusion(column_results, weight_bits: int, signed: bool = True) -> list[int]:
    """Fuse bit-sliced column results pairwise, the top slice carrying negative weight."""
    if weight_bits not in (1, 2, 4, 8):
        raise BadGrouping(f"weight_bits must be 1, 2, 4 or 8, got {weight_bits}")
    cols = [int(c) for c in column_results]
    if len(cols) % weight_bits:
        raise BadGrouping(f"{len(cols)} column results do not split into groups of {weight_bits}")
    if signed and weight_bits > 1:
        cols = [-c if j % weight_bits == weight_bits - 1 else c for j, c in enumerate(cols)]
    stage = 1
    while (1 << stage) <= weight_bits:
        sh = 1 << (stage - 1)
        cols = [lo + (hi << sh) for lo, hi in zip(cols[0::2], cols[1::2])]
        stage += 1
    return cols


def to_input_ints(activations, precision: PrecisionFormat) -> tuple[int | None, list[int]]:
    """Integer activations streamed by the macro (aligned for FP formats)."""
    if precision.is_float:
        return align_fp_to_int(activations, precision)
    lo, hi = int_range(precision)
    xs = [int(a) for a in activations]
    if any(x < lo or x > hi for x in xs):
        raise ValueError(f"activation outside the {precision.name} range")
    return None, xs


@dataclass(frozen=True)
class MacResult:
    outputs: tuple
    shared_exponent: int | None = None
    columns: tuple = ()


def serial_column_sums(xs, bits: np.ndarray, n: int, signed_input: bool) -> np.ndarray:
    """S&A result per column for integer inputs ``xs`` and weight bits ``[H][W]``."""
    x = np.asarray(xs, dtype=np.int64) & ((1 << n) - 1)
    acc = np.zeros(bits.shape[1], dtype=np.int64)
    b64 = bits.astype(np.int64)
    for b in range(n):
        partial = ((x >> b) & 1) @ b64
        if signed_input and b == n - 1:
            acc -= partial << b
        else:
            acc += partial << b
    return acc


def golden_mac(state: MacroState, activations, in_precision: PrecisionFormat,
               w_precision: PrecisionFormat | None = None) -> MacResult:
    """One macro operation on the selected weight set, modelled bit-serially."""
    if len(activations) != state.height:
        raise DimensionMismatch(f"expected {state.height} activations, got {len(activations)}")
    wf = w_precision or weight_format(in_precision)
    if wf.is_float or wf.total_bits not in (1, 2, 4, 8):
        raise ValueError(f"unsupported weight precision {wf.name}")
    if state.width % wf.total_bits:
        raise DimensionMismatch(f"width {state.width} is not a multiple of {wf.total_bits} weight bits")
    E, xs = to_input_ints(activations, in_precision)
    cols = serial_column_sums(xs, state.weights[state.sel], in_precision.input_bits, in_precision.signed)
    state.acc = [int(c) for c in cols]
    fused = output_fusion(cols, wf.total_bits, wf.signed)
    state.ofu = list(fused)
    return MacResult(tuple(fused), E, tuple(int(c) for c in cols))


def direct_dot(state: MacroState, activations, precision: PrecisionFormat) -> tuple[int | None, list[int]]:
    """Independent oracle: integer dot products without bit slicing."""
    E, xs = to_input_ints(activations, precision)
    w = state.weight_values(precision)
    return E, [int(v) for v in np.asarray(xs, dtype=object) @ w.astype(object)]


def exact_fp_dot(state: MacroState, activations, precision: PrecisionFormat) -> list[Fraction]:
    w = state.weight_values(precision)
    vals = [fp_value(a, precision) for a in activations]
    return [sum((v * int(w[i, g]) for i, v in enumerate(vals)), Fraction(0)) for g in range(w.shape[1])]


def fp_result(result: MacResult, precision: PrecisionFormat) -> list[Fraction]:
    """Rational value of fused outputs of an FP operation."""
    scale = Fraction(2) ** scale_exponent(result.shared_exponent, precision)
    return [Fraction(o) * scale for o in result.outputs]


def random_weights(state: MacroState, precision: PrecisionFormat, rng: np.random.Generator) -> np.ndarray:
    wf = weight_format(precision)
    lo, hi = int_range(wf)
    return rng.integers(lo, hi + 1, size=(state.height, state.width // wf.total_bits), dtype=np.int64)


def random_activations(height: int, precision: PrecisionFormat, rng: np.random.Generator) -> list[int]:
    """Random activation codes (finite codes only for FP formats)."""
    if precision.is_float:
        out = []
        while len(out) < height:
            c = int(rng.integers(0, 1 << precision.total_bits))
            if is_finite_code(c, precision):
                out.append(c)
        return out
    lo, hi = int_range(precision)
    return [int(v) for v in rng.integers(lo, hi + 1, size=height)]


# -- vector files ------------------------------------------------------------------------------


def write_hex_vectors(path, columns, rows) -> None:
    """One cycle per line; ``columns`` is a list of (name, width) in line order.

    Negative values are written in two's complement of the column width.
    """
    digits = [max(1, (w + 3) // 4) for _, w in columns]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# columns: " + " ".join(f"{n}[{w}]" for n, w in columns) + "\n")
        for row in rows:
            if len(row) != len(columns):
                raise DimensionMismatch(f"row has {len(row)} values for {len(columns)} columns")
            fh.write(" ".join(f"{int(v) & ((1 << w) - 1):0{d}x}" for v, (_, w), d in zip(row, columns, digits)) + "\n")


def read_hex_vectors(path) -> tuple[list, list]:
    columns, rows = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("# columns:"):
                for tok in line.split(":", 1)[1].split():
                    name, w = tok.rstrip("]").split("[")
                    columns.append((name, int(w)))
                continue
            if line.startswith("#"):
                continue
            rows.append([int(t, 16) for t in line.split()])
    return columns, rows
