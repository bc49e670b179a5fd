#!/usr/bin/env python3
"""
Network Specification Module

Data model for network architectures, edge-family parameters and quantization
settings, plus validated ingestion from (and serialisation to) the JSON spec format.
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

MAX_BITWIDTH = 64
DEFAULT_BITWIDTH = 8
DEFAULT_DOMAIN = (-1.0, 1.0)


class SpecError(ValueError):
    """Schema violation in a spec document; `path` names the offending node."""

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class SpecValidationError(ValueError):
    """One or more invariant violations, all reported together."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid spec:\n  " + "\n  ".join(self.problems))


class BasisMode(Enum):
    """How basis values are produced at inference time."""
    LUT = "lut"              # tabulated, fetched from memory
    RECURSIVE = "recursive"  # computed from the defining formula


class BaseActivation(Enum):
    SILU = "silu"
    RELU = "relu"
    TANH = "tanh"
    IDENTITY = "identity"


class SchemeKind(Enum):
    UNIFORM = "uniform"
    POWER_OF_TWO = "pot"
    ADDITIVE_POWER_OF_TWO = "apot"


@dataclass(frozen=True)
class QuantScheme:
    kind: SchemeKind = SchemeKind.UNIFORM
    terms: int = 0  # additive terms, APoT only

    @classmethod
    def uniform(cls):
        return cls(SchemeKind.UNIFORM)

    @classmethod
    def power_of_two(cls):
        return cls(SchemeKind.POWER_OF_TWO)

    @classmethod
    def additive_power_of_two(cls, terms):
        return cls(SchemeKind.ADDITIVE_POWER_OF_TWO, terms)

    def to_json(self):
        if self.kind is SchemeKind.ADDITIVE_POWER_OF_TWO:
            return {"apot": self.terms}
        return self.kind.value


def adders_per_multiplication(scheme, b):
    """
    Number of adders X that replace one multiplication at bitwidth b.

    Args:
        scheme: QuantScheme in use
        b: operand bitwidth (>= 1)

    Returns:
        b - 1 for uniform quantization, 0 for power-of-two, n for APoT with n terms
    """
    if scheme.kind is SchemeKind.UNIFORM:
        return b - 1
    if scheme.kind is SchemeKind.POWER_OF_TWO:
        return 0
    return scheme.terms


@dataclass(frozen=True)
class QuantConfig:
    b_i: int = DEFAULT_BITWIDTH
    b_w: int = DEFAULT_BITWIDTH
    b_knot: int = DEFAULT_BITWIDTH
    b_basis: int = DEFAULT_BITWIDTH
    b_rbf: int = DEFAULT_BITWIDTH
    b_cheby: int = DEFAULT_BITWIDTH
    b_fourier: int = DEFAULT_BITWIDTH
    scheme: QuantScheme = field(default_factory=QuantScheme.uniform)

    BIT_FIELDS = ("b_i", "b_w", "b_knot", "b_basis", "b_rbf", "b_cheby", "b_fourier")

    @classmethod
    def all_bits(cls, bits, scheme=None):
        return cls(**{name: bits for name in cls.BIT_FIELDS},
                   scheme=scheme or QuantScheme.uniform())

    @property
    def x_w(self):
        return adders_per_multiplication(self.scheme, self.b_w)

    @property
    def x_knot(self):
        return adders_per_multiplication(self.scheme, self.b_knot)

    def basis_bits(self, family):
        """Bitwidth of the basis values a family's linear combination consumes."""
        return getattr(self, family.BASIS_BITS)

    def problems(self):
        found = []
        for name in self.BIT_FIELDS:
            value = getattr(self, name)
            if not 1 <= value <= MAX_BITWIDTH:
                found.append(f"quant.{name}: bitwidth {value} outside [1, {MAX_BITWIDTH}]")
        if self.scheme.kind is SchemeKind.ADDITIVE_POWER_OF_TWO and self.scheme.terms < 1:
            found.append(f"quant.scheme: apot needs at least 1 term, got {self.scheme.terms}")
        return found


class _Family:
    """Shared behaviour of the edge families; subclasses are frozen dataclasses."""

    TAG = ""
    BASIS_BITS = "b_w"

    def __post_init__(self):
        found = self.problems()
        if found:
            raise SpecValidationError(found)

    def problems(self, path="family"):
        return []

    @property
    def is_kan(self):
        return True

    @property
    def n_coeffs(self):
        """Length of an edge's coefficient vector."""
        raise NotImplementedError

    @property
    def term_count(self):
        """Number of terms in the edge's linear combination."""
        return self.n_coeffs

    @property
    def input_domain(self):
        return DEFAULT_DOMAIN


@dataclass(frozen=True)
class Mlp(_Family):
    activation: BaseActivation = BaseActivation.IDENTITY

    TAG = "mlp"
    BASIS_BITS = "b_i"

    @property
    def is_kan(self):
        return False

    @property
    def n_coeffs(self):
        return 0

    @property
    def term_count(self):
        return 1

    def to_json(self):
        return {"type": self.TAG, "activation": self.activation.value}


@dataclass(frozen=True)
class BSpline(_Family):
    k: int = 3
    grid_size: int = 5
    domain: tuple = DEFAULT_DOMAIN
    base: BaseActivation = BaseActivation.SILU

    TAG = "bspline"
    BASIS_BITS = "b_basis"

    def problems(self, path="family"):
        found = []
        if self.k < 1:
            found.append(f"{path}.k: spline order must be >= 1, got {self.k}")
        if self.grid_size < 1:
            found.append(f"{path}.G: grid intervals must be >= 1, got {self.grid_size}")
        a, b = self.domain
        if not a < b:
            found.append(f"{path}.domain: need a < b, got [{a}, {b}]")
        return found

    @property
    def n_coeffs(self):
        return self.grid_size + self.k

    @property
    def term_count(self):
        return self.k + 1

    @property
    def input_domain(self):
        return self.domain

    @property
    def spacing(self):
        a, b = self.domain
        return (b - a) / self.grid_size

    @property
    def inv_spacing(self):
        a, b = self.domain
        return self.grid_size / (b - a)

    def to_json(self):
        return {"type": self.TAG, "k": self.k, "G": self.grid_size,
                "domain": list(self.domain), "base": self.base.value}


@dataclass(frozen=True)
class Grbf(_Family):
    n_centers: int = 5
    width: float = 0.5
    centers: tuple = ()
    domain: tuple = DEFAULT_DOMAIN
    base: BaseActivation = BaseActivation.SILU

    TAG = "grbf"
    BASIS_BITS = "b_rbf"

    @classmethod
    def uniform(cls, n_centers, domain=DEFAULT_DOMAIN, width=None, base=BaseActivation.SILU):
        """Centers evenly spaced over the domain, sharing one width."""
        a, b = domain
        if n_centers == 1:
            centers = ((a + b) / 2.0,)
        else:
            centers = tuple(float(c) for c in np.linspace(a, b, n_centers))
        if width is None:
            width = cls.default_width(centers, domain)
        return cls(n_centers, width, centers, tuple(domain), base)

    @staticmethod
    def default_width(centers, domain=DEFAULT_DOMAIN):
        """Mean center spacing; half the domain for a single center."""
        if len(centers) < 2:
            return (domain[1] - domain[0]) / 2.0
        return (centers[-1] - centers[0]) / (len(centers) - 1)

    def problems(self, path="family"):
        found = []
        if self.n_centers < 1:
            found.append(f"{path}.N_c: need at least one center, got {self.n_centers}")
        if not self.width > 0:
            found.append(f"{path}.width: must be positive, got {self.width}")
        if len(self.centers) != self.n_centers:
            found.append(f"{path}.centers: expected {self.n_centers} centers, got {len(self.centers)}")
        elif any(c1 >= c2 for c1, c2 in zip(self.centers, self.centers[1:])):
            found.append(f"{path}.centers: must be strictly increasing")
        a, b = self.domain
        if not a < b:
            found.append(f"{path}.domain: need a < b, got [{a}, {b}]")
        return found

    @property
    def n_coeffs(self):
        return self.n_centers

    @property
    def input_domain(self):
        return self.domain

    @property
    def neg_inv_two_sigma_sq(self):
        return -1.0 / (2.0 * self.width * self.width)

    def to_json(self):
        return {"type": self.TAG, "N_c": self.n_centers, "width": self.width,
                "centers": list(self.centers), "domain": list(self.domain),
                "base": self.base.value}


@dataclass(frozen=True)
class Chebyshev(_Family):
    degree: int = 5
    base: BaseActivation = BaseActivation.SILU

    TAG = "chebyshev"
    BASIS_BITS = "b_cheby"

    def problems(self, path="family"):
        if self.degree < 0:
            return [f"{path}.n: degree must be >= 0, got {self.degree}"]
        return []

    @property
    def n_coeffs(self):
        return self.degree + 1

    def to_json(self):
        return {"type": self.TAG, "n": self.degree, "base": self.base.value}


@dataclass(frozen=True)
class Fourier(_Family):
    grid_size: int = 5
    omega: float = 1.0
    base: BaseActivation = BaseActivation.SILU

    TAG = "fourier"
    BASIS_BITS = "b_fourier"

    def problems(self, path="family"):
        found = []
        if self.grid_size < 1:
            found.append(f"{path}.G: frequency grid must be >= 1, got {self.grid_size}")
        if not self.omega > 0:
            found.append(f"{path}.omega: must be positive, got {self.omega}")
        return found

    @property
    def n_coeffs(self):
        # interleaved (a_1, b_1, a_2, b_2, ...)
        return 2 * self.grid_size

    @property
    def period(self):
        return 2.0 * math.pi / self.omega

    def to_json(self):
        return {"type": self.TAG, "G": self.grid_size, "omega": self.omega,
                "base": self.base.value}


EdgeFamily = Union[Mlp, BSpline, Grbf, Chebyshev, Fourier]
FAMILIES = {cls.TAG: cls for cls in (Mlp, BSpline, Grbf, Chebyshev, Fourier)}
KAN_FAMILY_TAGS = ("bspline", "grbf", "chebyshev", "fourier")


@dataclass(frozen=True)
class LayerSpec:
    n_in: int
    n_out: int
    family: EdgeFamily

    @property
    def n_edges(self):
        return self.n_in * self.n_out


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    name: str = ""

    @property
    def widths(self):
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    def problems(self):
        found = []
        if not self.layers:
            found.append("layers: at least one layer is required")
        for index, layer in enumerate(self.layers):
            if layer.n_in < 1:
                found.append(f"layers[{index}].n_in: width must be >= 1, got {layer.n_in}")
            if layer.n_out < 1:
                found.append(f"layers[{index}].n_out: width must be >= 1, got {layer.n_out}")
        for index, (left, right) in enumerate(zip(self.layers, self.layers[1:])):
            if left.n_out != right.n_in:
                found.append(f"layers[{index + 1}].n_in: expected {left.n_out} to match "
                             f"layers[{index}].n_out, got {right.n_in}")
        return found


@dataclass(frozen=True)
class EdgeWeights:
    w_b: float
    coeffs: tuple = ()


def build_network(widths, family, name=""):
    """Chain `widths` into a NetworkSpec using the same family on every layer."""
    layers = tuple(LayerSpec(n_in, n_out, family) for n_in, n_out in zip(widths, widths[1:]))
    return NetworkSpec(layers, name)


def knot_vector(family):
    """
    Extended uniform knot vector of a B-spline family.

    Returns:
        numpy array of G + 2k + 1 knots at spacing (b - a)/G running from a - k*h to b + k*h
    """
    a, _ = family.domain
    return a + family.spacing * np.arange(-family.k, family.grid_size + family.k + 1)


# ---------------------------------------------------------------------------
# JSON ingestion
# ---------------------------------------------------------------------------

_TOP_KEYS = {"name", "quant", "layers"}
_LAYER_KEYS = {"n_in", "n_out", "family"}
_QUANT_KEYS = set(QuantConfig.BIT_FIELDS) | {"scheme"}
_FAMILY_KEYS = {
    "mlp": {"type", "activation"},
    "bspline": {"type", "k", "G", "domain", "base"},
    "grbf": {"type", "N_c", "width", "centers", "domain", "base"},
    "chebyshev": {"type", "n", "base"},
    "fourier": {"type", "G", "omega", "base"},
}


def _expect_object(value, path, allowed, required=()):
    if not isinstance(value, dict):
        raise SpecError(path, f"expected an object, got {type(value).__name__}")
    unknown = sorted(set(value) - allowed)
    if unknown:
        raise SpecError(f"{path}.{unknown[0]}", "unknown key")
    for key in required:
        if key not in value:
            raise SpecError(f"{path}.{key}", "missing required key")
    return value


def _expect_int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError(path, f"expected an integer, got {value!r}")
    return value


def _expect_number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(path, f"expected a number, got {value!r}")
    return float(value)


def _expect_domain(value, path):
    if not isinstance(value, list) or len(value) != 2:
        raise SpecError(path, "expected a two-element list [a, b]")
    return (_expect_number(value[0], f"{path}[0]"), _expect_number(value[1], f"{path}[1]"))


def _expect_enum(enum_cls, value, path):
    try:
        return enum_cls(value)
    except ValueError:
        choices = ", ".join(member.value for member in enum_cls)
        raise SpecError(path, f"expected one of {choices}, got {value!r}") from None


def parse_scheme(value, path="quant.scheme"):
    if value == "uniform":
        return QuantScheme.uniform()
    if value == "pot":
        return QuantScheme.power_of_two()
    if isinstance(value, dict) and set(value) == {"apot"}:
        return QuantScheme.additive_power_of_two(_expect_int(value["apot"], f"{path}.apot"))
    raise SpecError(path, f'expected "uniform", "pot" or {{"apot": n}}, got {value!r}')


def parse_quant(obj, path="quant"):
    """Build a QuantConfig from its JSON object; missing fields take the defaults."""
    _expect_object(obj, path, _QUANT_KEYS)
    bits = {name: _expect_int(obj[name], f"{path}.{name}")
            for name in QuantConfig.BIT_FIELDS if name in obj}
    scheme = parse_scheme(obj["scheme"], f"{path}.scheme") if "scheme" in obj else QuantScheme.uniform()
    return QuantConfig(**bits, scheme=scheme)


def parse_family(obj, path="family"):
    """
    Build an edge family from its JSON object.

    Raises:
        SpecError: on schema violations
        SpecValidationError: on invariant violations of the family parameters
    """
    if not isinstance(obj, dict):
        raise SpecError(path, f"expected an object, got {type(obj).__name__}")
    tag = obj.get("type")
    if tag not in _FAMILY_KEYS:
        raise SpecError(f"{path}.type", f"expected one of {', '.join(_FAMILY_KEYS)}, got {tag!r}")
    _expect_object(obj, path, _FAMILY_KEYS[tag])
    base = _expect_enum(BaseActivation, obj.get("base", "silu"), f"{path}.base")

    if tag == "mlp":
        return Mlp(_expect_enum(BaseActivation, obj.get("activation", "identity"), f"{path}.activation"))

    if tag == "bspline":
        _expect_object(obj, path, _FAMILY_KEYS[tag], required=("k", "G"))
        domain = _expect_domain(obj["domain"], f"{path}.domain") if "domain" in obj else DEFAULT_DOMAIN
        return _checked(BSpline, path, k=_expect_int(obj["k"], f"{path}.k"),
                        grid_size=_expect_int(obj["G"], f"{path}.G"), domain=domain, base=base)

    if tag == "grbf":
        _expect_object(obj, path, _FAMILY_KEYS[tag], required=("N_c",))
        n_centers = _expect_int(obj["N_c"], f"{path}.N_c")
        domain = _expect_domain(obj["domain"], f"{path}.domain") if "domain" in obj else DEFAULT_DOMAIN
        width = _expect_number(obj["width"], f"{path}.width") if "width" in obj else None
        if "centers" in obj:
            if not isinstance(obj["centers"], list):
                raise SpecError(f"{path}.centers", "expected a list of numbers")
            centers = tuple(_expect_number(c, f"{path}.centers[{i}]") for i, c in enumerate(obj["centers"]))
            if width is None:
                width = Grbf.default_width(centers, domain)
            return _checked(Grbf, path, n_centers=n_centers, width=width,
                            centers=centers, domain=domain, base=base)
        if n_centers < 1:
            raise SpecValidationError([f"{path}.N_c: need at least one center, got {n_centers}"])
        try:
            return Grbf.uniform(n_centers, domain, width, base)
        except SpecValidationError as exc:
            raise SpecValidationError([p.replace("family", path, 1) for p in exc.problems]) from None

    if tag == "chebyshev":
        _expect_object(obj, path, _FAMILY_KEYS[tag], required=("n",))
        return _checked(Chebyshev, path, degree=_expect_int(obj["n"], f"{path}.n"), base=base)

    _expect_object(obj, path, _FAMILY_KEYS[tag], required=("G",))
    omega = _expect_number(obj["omega"], f"{path}.omega") if "omega" in obj else 1.0
    return _checked(Fourier, path, grid_size=_expect_int(obj["G"], f"{path}.G"), omega=omega, base=base)


def _checked(cls, path, **kwargs):
    # re-label problems with the document path of the family
    try:
        return cls(**kwargs)
    except SpecValidationError as exc:
        raise SpecValidationError([p.replace("family", path, 1) for p in exc.problems]) from None


def parse_spec_obj(doc):
    """Validate an already-decoded spec document; see parse_spec."""
    _expect_object(doc, "$", _TOP_KEYS, required=("layers",))
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise SpecError("name", f"expected a string, got {name!r}")
    quant = parse_quant(doc["quant"]) if "quant" in doc else QuantConfig()
    if not isinstance(doc["layers"], list):
        raise SpecError("layers", "expected a list of layers")

    problems = list(quant.problems())
    layers = []
    for index, layer_obj in enumerate(doc["layers"]):
        path = f"layers[{index}]"
        _expect_object(layer_obj, path, _LAYER_KEYS, required=("n_in", "n_out", "family"))
        n_in = _expect_int(layer_obj["n_in"], f"{path}.n_in")
        n_out = _expect_int(layer_obj["n_out"], f"{path}.n_out")
        try:
            family = parse_family(layer_obj["family"], f"{path}.family")
        except SpecValidationError as exc:
            problems.extend(exc.problems)
            family = None
        layers.append(LayerSpec(n_in, n_out, family))

    spec = NetworkSpec(tuple(layers), name)
    problems.extend(spec.problems())
    if problems:
        raise SpecValidationError(problems)
    return spec, quant


def parse_spec(text):
    """
    Parse and validate a JSON spec document.

    Args:
        text: JSON text following the spec schema

    Returns:
        tuple (NetworkSpec, QuantConfig) with defaults applied

    Raises:
        SpecError: malformed JSON or schema violation (names the offending path)
        SpecValidationError: invariant violations, all of them listed
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError("$", f"malformed JSON: {e}") from None
    return parse_spec_obj(doc)


def load_spec(path):
    with open(path, 'r', encoding='utf-8') as f:
        return parse_spec(f.read())


def dump_spec(spec, quant=None):
    """Serialise a spec (and quantization) back to the JSON schema parse_spec reads."""
    quant = quant or QuantConfig()
    doc = {
        "name": spec.name,
        "quant": {**{name: getattr(quant, name) for name in QuantConfig.BIT_FIELDS},
                  "scheme": quant.scheme.to_json()},
        "layers": [{"n_in": layer.n_in, "n_out": layer.n_out, "family": layer.family.to_json()}
                   for layer in spec.layers],
    }
    return json.dumps(doc, indent=4)
