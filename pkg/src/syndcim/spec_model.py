"""Macro specification: precision formats, activity profile, TOML parsing.

A spec file looks like::

    [array]
    height = 64
    width = 64
    mcr = 2

    [precision]
    formats = ["INT4", "INT8", "FP4", "FP8"]

    [performance]
    mac_frequency_hz = 800e6
    weight_update_frequency_hz = 800e6
    corner = "0v9"

    [preference]
    power = 0.4
    area = 0.4
    latency = 0.2

    [activity]
    input_toggle_rate = 0.5
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
import tomli_w

MIN_DIM = 8
MAX_DIM = 1024
ALIGN_GUARD_BITS = 4


class SpecError(Exception):
    pass


class MalformedDocument(SpecError):
    pass


class InvalidSpec(SpecError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True, order=True)
class PrecisionFormat:
    name: str
    kind: str  # "integer" | "floating"
    total_bits: int
    exponent_bits: int = 0
    mantissa_bits: int = 0

    @property
    def is_float(self) -> bool:
        return self.kind == "floating"

    @property
    def bias(self) -> int:
        return (1 << (self.exponent_bits - 1)) - 1 if self.is_float else 0

    @property
    def signed(self) -> bool:
        # INT1 is a binary {0, 1} operand; every wider format is two's complement.
        return self.is_float or self.total_bits > 1

    @property
    def align_width(self) -> int:
        """Magnitude bits of an aligned mantissa (hidden bit + mantissa + guard)."""
        return self.mantissa_bits + 1 + ALIGN_GUARD_BITS if self.is_float else 0

    @property
    def input_bits(self) -> int:
        """Bit-serial cycles needed to stream one activation of this format."""
        if self.is_float:
            return self.align_width + 1
        return self.total_bits

    @property
    def weight_bits(self) -> int:
        """Width of the stored (bit-sliced) weight used with this format."""
        if self.is_float:
            return COMPANION_INT[self.name].total_bits
        return self.total_bits


INT1 = PrecisionFormat("INT1", "integer", 1)
INT2 = PrecisionFormat("INT2", "integer", 2)
INT4 = PrecisionFormat("INT4", "integer", 4)
INT8 = PrecisionFormat("INT8", "integer", 8)
FP4 = PrecisionFormat("FP4", "floating", 4, 2, 1)
FP8 = PrecisionFormat("FP8", "floating", 8, 4, 3)
BF16 = PrecisionFormat("BF16", "floating", 16, 8, 7)

FORMATS = {f.name: f for f in (INT1, INT2, INT4, INT8, FP4, FP8, BF16)}

# Integer datapath each FP format runs on: weights are stored as integers of
# this width, activations are aligned to shared-exponent integers.
COMPANION_INT = {"FP4": INT4, "FP8": INT8, "BF16": INT8}


def format_by_name(name: str) -> PrecisionFormat:
    try:
        return FORMATS[name.upper()]
    except KeyError:
        raise InvalidSpec("precision.formats", f"unknown format {name!r}") from None


@dataclass(frozen=True)
class ActivityProfile:
    input_toggle_rate: float = 0.5
    input_sparsity: float = 0.0
    weight_sparsity: float = 0.0

    def __post_init__(self):
        for name in ("input_toggle_rate", "input_sparsity", "weight_sparsity"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not (0.0 <= v <= 1.0):
                raise InvalidSpec(f"activity.{name}", f"must lie in [0, 1], got {v!r}")


@dataclass(frozen=True)
class Preference:
    power: float = 1 / 3
    area: float = 1 / 3
    latency: float = 1 / 3

    def __post_init__(self):
        for name in ("power", "area", "latency"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v) or v < 0:
                raise InvalidSpec(f"preference.{name}", f"must be a non-negative number, got {v!r}")
        if abs(self.power + self.area + self.latency - 1.0) > 1e-9:
            raise InvalidSpec("preference", "weights must sum to 1")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.power, self.area, self.latency)


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class MacroSpec:
    height: int
    width: int
    mcr: int
    precisions: tuple[PrecisionFormat, ...]
    mac_frequency_hz: float
    weight_update_frequency_hz: float
    corner: str = "0v9"
    preference: Preference = field(default_factory=Preference)
    activity: ActivityProfile = field(default_factory=ActivityProfile)
    # tiny fixtures (e.g. a 2x1 array) skip the size range but keep power-of-two checks
    dims_check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        for name in ("height", "width"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise InvalidSpec(f"array.{name}", f"must be an integer, got {v!r}")
            if not _is_pow2(v):
                raise InvalidSpec(f"array.{name}", f"{name} must be a power of two, got {v}")
            if self.dims_check and not MIN_DIM <= v <= MAX_DIM:
                raise InvalidSpec(f"array.{name}", f"{name} must lie in [{MIN_DIM}, {MAX_DIM}], got {v}")
        if not isinstance(self.mcr, int) or isinstance(self.mcr, bool) or self.mcr < 1:
            raise InvalidSpec("array.mcr", f"mcr must be an integer >= 1, got {self.mcr!r}")
        if not _is_pow2(self.mcr):
            raise InvalidSpec("array.mcr", f"mcr must be a power of two, got {self.mcr}")
        if not self.precisions:
            raise InvalidSpec("precision.formats", "at least one format is required")
        if len(set(self.precisions)) != len(self.precisions):
            raise InvalidSpec("precision.formats", "duplicate formats")
        for p in self.precisions:
            if p.is_float and p.name not in COMPANION_INT:
                raise InvalidSpec("precision.formats", f"no integer datapath for {p.name}")
        for name in ("mac_frequency_hz", "weight_update_frequency_hz"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v) or v <= 0:
                raise InvalidSpec(f"performance.{name}", f"must be a positive finite number, got {v!r}")
        if not isinstance(self.corner, str) or not self.corner:
            raise InvalidSpec("performance.corner", "must be a non-empty identifier")

    @property
    def float_formats(self) -> tuple[PrecisionFormat, ...]:
        return tuple(p for p in self.precisions if p.is_float)

    @property
    def max_weight_bits(self) -> int:
        return max(p.weight_bits for p in self.precisions)

    @property
    def max_input_bits(self) -> int:
        return max(p.input_bits for p in self.precisions)

    @property
    def max_exponent_bits(self) -> int:
        return max((p.exponent_bits for p in self.float_formats), default=0)

    @property
    def reference_precision(self) -> PrecisionFormat:
        """Widest integer format (falls back to the first format)."""
        ints = [p for p in self.precisions if not p.is_float]
        if ints:
            return max(ints, key=lambda p: p.total_bits)
        return self.precisions[0]

    def replace(self, **changes) -> "MacroSpec":
        from dataclasses import replace

        return replace(self, **changes)


def _get(doc: dict, table: str, key: str, default=..., types=None):
    tbl = doc.get(table, {})
    if not isinstance(tbl, dict):
        raise InvalidSpec(table, "must be a table")
    if key not in tbl:
        if default is ...:
            raise InvalidSpec(f"{table}.{key}", "missing required key")
        return default
    v = tbl[key]
    if types is not None and (not isinstance(v, types) or isinstance(v, bool)):
        raise InvalidSpec(f"{table}.{key}", f"wrong type {type(v).__name__}")
    return v


_KNOWN = {
    "array": {"height", "width", "mcr"},
    "precision": {"formats"},
    "performance": {"mac_frequency_hz", "weight_update_frequency_hz", "corner"},
    "preference": {"power", "area", "latency"},
    "activity": {"input_toggle_rate", "input_sparsity", "weight_sparsity"},
}


def parse_spec(text: str) -> MacroSpec:
    """Parse a TOML spec document into a validated :class:`MacroSpec`."""
    try:
        doc = tomllib.loads(text)
    except (tomllib.TOMLDecodeError, TypeError, ValueError) as e:
        raise MalformedDocument(str(e)) from e
    for table, value in doc.items():
        if table not in _KNOWN:
            raise InvalidSpec(table, "unknown table")
        if not isinstance(value, dict):
            raise InvalidSpec(table, "must be a table")
        for key in value:
            if key not in _KNOWN[table]:
                raise InvalidSpec(f"{table}.{key}", "unknown key")

    num = (int, float)
    formats = _get(doc, "precision", "formats", types=list)
    if not all(isinstance(f, str) for f in formats):
        raise InvalidSpec("precision.formats", "must be a list of strings")
    pref = Preference(
        _get(doc, "preference", "power", 1 / 3, num),
        _get(doc, "preference", "area", 1 / 3, num),
        _get(doc, "preference", "latency", 1 / 3, num),
    )
    activity = ActivityProfile(
        _get(doc, "activity", "input_toggle_rate", 0.5, num),
        _get(doc, "activity", "input_sparsity", 0.0, num),
        _get(doc, "activity", "weight_sparsity", 0.0, num),
    )
    return MacroSpec(
        height=_get(doc, "array", "height", types=int),
        width=_get(doc, "array", "width", types=int),
        mcr=_get(doc, "array", "mcr", 1, int),
        precisions=tuple(format_by_name(f) for f in formats),
        mac_frequency_hz=float(_get(doc, "performance", "mac_frequency_hz", types=num)),
        weight_update_frequency_hz=float(_get(doc, "performance", "weight_update_frequency_hz", types=num)),
        corner=_get(doc, "performance", "corner", "0v9", str),
        preference=pref,
        activity=activity,
    )


def serialize_spec(spec: MacroSpec) -> str:
    doc = {
        "array": {"height": spec.height, "width": spec.width, "mcr": spec.mcr},
        "precision": {"formats": [p.name for p in spec.precisions]},
        "performance": {
            "mac_frequency_hz": float(spec.mac_frequency_hz),
            "weight_update_frequency_hz": float(spec.weight_update_frequency_hz),
            "corner": spec.corner,
        },
        "preference": {
            "power": spec.preference.power,
            "area": spec.preference.area,
            "latency": spec.preference.latency,
        },
        "activity": {
            "input_toggle_rate": spec.activity.input_toggle_rate,
            "input_sparsity": spec.activity.input_sparsity,
            "weight_sparsity": spec.activity.weight_sparsity,
        },
    }
    return tomli_w.dumps(doc)


def load_spec(path) -> MacroSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


@dataclass(frozen=True, order=True)
class Diagnostic:
    kind: str
    message: str

    def __str__(self):
        return f"{self.kind}: {self.message}"


def validate_compatibility(spec: MacroSpec, library) -> list[Diagnostic]:
    """One diagnostic per subcircuit kind that no library variant can serve."""
    from .library import SubcircuitKind, kind_requirements

    diags = []
    for kind in SubcircuitKind:
        req = kind_requirements(spec, kind)
        if req is None:
            continue
        variants = library.variants_of(kind)
        if any(v.applicable(**req) and v.has_corner(spec.corner) for v in variants):
            continue
        diags.append(Diagnostic(kind.label, _why_unsupported(spec, kind, variants, req)))
    return sorted(diags)


def _why_unsupported(spec, kind, variants, req) -> str:
    if not variants:
        return "library has no variant"
    if not any(v.has_corner(spec.corner) for v in variants):
        return f"no variant characterized at corner {spec.corner}"
    if not any(v.applicable(mcr=req["mcr"]) for v in variants):
        return f"no variant supports MCR={spec.mcr}"
    if req.get("exponent_bits") and not any(v.applicable(exponent_bits=req["exponent_bits"]) for v in variants):
        return f"no variant supports {req['exponent_bits']} exponent bits"
    if not any(v.applicable(dims=req["dims"]) for v in variants):
        return f"no variant supports dims {req['dims']}"
    return "no variant supports the requested precisions"
