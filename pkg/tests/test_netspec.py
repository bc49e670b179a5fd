import json
import os

import numpy as np
import pytest

from netspec import (
    BaseActivation,
    BSpline,
    Chebyshev,
    Fourier,
    Grbf,
    Mlp,
    QuantConfig,
    QuantScheme,
    SchemeKind,
    SpecError,
    SpecValidationError,
    adders_per_multiplication,
    dump_spec,
    knot_vector,
    parse_spec,
)
from path_utils import get_script_dir

SPECS_DIR = os.path.join(get_script_dir(), "specs")


def _doc(layers, **extra):
    return json.dumps({"name": "t", "layers": layers, **extra})


class TestParseSpec:

    def test_minimal_mlp(self):
        spec, quant = parse_spec(_doc([{"n_in": 3, "n_out": 2, "family": {"type": "mlp"}}]))
        assert len(spec.layers) == 1
        assert (spec.layers[0].n_in, spec.layers[0].n_out) == (3, 2)
        assert isinstance(spec.layers[0].family, Mlp)
        assert quant == QuantConfig()

    def test_three_layer_bspline(self):
        family = {"type": "bspline", "k": 3, "G": 5}
        spec, _ = parse_spec(_doc([
            {"n_in": 3, "n_out": 16, "family": family},
            {"n_in": 16, "n_out": 16, "family": family},
            {"n_in": 16, "n_out": 2, "family": family},
        ]))
        assert spec.widths == [3, 16, 16, 2]
        assert all(layer.family == BSpline(3, 5) for layer in spec.layers)

    def test_broken_chain_is_rejected(self):
        with pytest.raises(SpecValidationError) as excinfo:
            parse_spec(_doc([
                {"n_in": 3, "n_out": 16, "family": {"type": "mlp"}},
                {"n_in": 8, "n_out": 2, "family": {"type": "mlp"}},
            ]))
        assert any("layers[1].n_in" in problem for problem in excinfo.value.problems)

    def test_every_problem_is_listed(self):
        with pytest.raises(SpecValidationError) as excinfo:
            parse_spec(_doc([
                {"n_in": 3, "n_out": 4, "family": {"type": "bspline", "k": 0, "G": 0}},
                {"n_in": 5, "n_out": 0, "family": {"type": "mlp"}},
            ], quant={"b_w": 65}))
        problems = excinfo.value.problems
        assert any("quant.b_w" in p for p in problems)
        assert any("layers[0].family.k" in p for p in problems)
        assert any("layers[0].family.G" in p for p in problems)
        assert any("layers[1].n_out" in p for p in problems)
        assert any("layers[1].n_in" in p for p in problems)

    def test_defaults_applied(self):
        spec, quant = parse_spec(_doc([
            {"n_in": 1, "n_out": 1, "family": {"type": "bspline", "k": 2, "G": 4}},
            {"n_in": 1, "n_out": 1, "family": {"type": "fourier", "G": 3}},
        ]))
        assert all(getattr(quant, name) == 8 for name in QuantConfig.BIT_FIELDS)
        assert quant.scheme.kind is SchemeKind.UNIFORM
        assert spec.layers[0].family.domain == (-1.0, 1.0)
        assert spec.layers[0].family.base is BaseActivation.SILU
        assert spec.layers[1].family.omega == 1.0

    def test_grbf_default_centers(self):
        spec, _ = parse_spec(_doc([{"n_in": 1, "n_out": 1, "family": {"type": "grbf", "N_c": 5}}]))
        family = spec.layers[0].family
        np.testing.assert_allclose(family.centers, [-1.0, -0.5, 0.0, 0.5, 1.0])
        assert family.width == pytest.approx(0.5)

    def test_grbf_explicit_centers_default_width(self):
        explicit = {"type": "grbf", "N_c": 5, "centers": [-1.0, -0.5, 0.0, 0.5, 1.0]}
        spec, _ = parse_spec(_doc([{"n_in": 1, "n_out": 1, "family": explicit},
                                   {"n_in": 1, "n_out": 1, "family": {"type": "grbf", "N_c": 5}}]))
        assert spec.layers[0].family.width == pytest.approx(0.5)
        assert spec.layers[0].family == spec.layers[1].family

    def test_grbf_single_center_width(self):
        doc = {"type": "grbf", "N_c": 1, "centers": [0.25], "domain": [0.0, 2.0]}
        spec, _ = parse_spec(_doc([{"n_in": 1, "n_out": 1, "family": doc}]))
        assert spec.layers[0].family.width == pytest.approx(1.0)
        assert Grbf.uniform(1).width == pytest.approx(1.0)

    def test_unknown_key_names_its_path(self):
        with pytest.raises(SpecError) as excinfo:
            parse_spec(_doc([{"n_in": 1, "n_out": 1, "family": {"type": "chebyshev", "n": 2, "m": 1}}]))
        assert excinfo.value.path == "layers[0].family.m"

    def test_wrong_type_names_its_path(self):
        with pytest.raises(SpecError) as excinfo:
            parse_spec(_doc([{"n_in": "3", "n_out": 1, "family": {"type": "mlp"}}]))
        assert excinfo.value.path == "layers[0].n_in"

    def test_unknown_family(self):
        with pytest.raises(SpecError) as excinfo:
            parse_spec(_doc([{"n_in": 1, "n_out": 1, "family": {"type": "wavelet"}}]))
        assert excinfo.value.path == "layers[0].family.type"

    def test_malformed_json(self):
        with pytest.raises(SpecError):
            parse_spec("{not json")

    def test_apot_scheme(self):
        _, quant = parse_spec(_doc([{"n_in": 1, "n_out": 1, "family": {"type": "mlp"}}],
                                   quant={"scheme": {"apot": 2}, "b_i": 4}))
        assert quant.scheme == QuantScheme.additive_power_of_two(2)
        assert quant.b_i == 4


class TestRoundTrip:

    @pytest.mark.parametrize("name", sorted(f for f in os.listdir(SPECS_DIR) if f.endswith(".json")))
    def test_bundled_specs(self, name):
        with open(os.path.join(SPECS_DIR, name), encoding="utf-8") as f:
            spec, quant = parse_spec(f.read())
        assert parse_spec(dump_spec(spec, quant)) == (spec, quant)

    def test_every_family(self):
        families = [Mlp(BaseActivation.TANH), BSpline(2, 7, (0.0, 3.0), BaseActivation.RELU),
                    Grbf.uniform(4, (-2.0, 2.0)), Chebyshev(0), Fourier(3, 2.5)]
        layers = [{"n_in": 2, "n_out": 2, "family": f.to_json()} for f in families]
        spec, quant = parse_spec(_doc(layers, quant={"scheme": "pot", "b_knot": 12}))
        assert [layer.family for layer in spec.layers] == families
        assert parse_spec(dump_spec(spec, quant)) == (spec, quant)


class TestKnotVector:

    def test_single_interval(self):
        np.testing.assert_allclose(knot_vector(BSpline(1, 1, (0.0, 1.0))), [-1.0, 0.0, 1.0, 2.0])

    def test_cubic_grid(self):
        knots = knot_vector(BSpline(3, 5))
        assert len(knots) == 12
        np.testing.assert_allclose(np.diff(knots), 0.4)
        np.testing.assert_allclose([knots[0], knots[-1]], [-2.2, 2.2])

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
    @pytest.mark.parametrize("grid_size", [1, 3, 5, 50])
    def test_count_and_strictly_increasing(self, k, grid_size):
        knots = knot_vector(BSpline(k, grid_size))
        assert len(knots) == grid_size + 2 * k + 1
        assert np.all(np.diff(knots) > 0)

    def test_order_zero_rejected(self):
        with pytest.raises(SpecValidationError):
            BSpline(0, 4)


class TestAddersPerMultiplication:

    def test_uniform(self):
        assert adders_per_multiplication(QuantScheme.uniform(), 8) == 7

    def test_power_of_two(self):
        assert adders_per_multiplication(QuantScheme.power_of_two(), 8) == 0

    def test_additive_power_of_two(self):
        assert adders_per_multiplication(QuantScheme.additive_power_of_two(2), 8) == 2


class TestCoefficientLengths:

    def test_lengths(self):
        assert BSpline(3, 5).n_coeffs == 8
        assert Grbf.uniform(5).n_coeffs == 5
        assert Chebyshev(5).n_coeffs == 6
        assert Fourier(5).n_coeffs == 10
        assert Mlp().n_coeffs == 0

    def test_grbf_centers_must_increase(self):
        with pytest.raises(SpecValidationError):
            Grbf(2, 0.3, (0.5, -0.5))
