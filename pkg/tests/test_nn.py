import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lure_verify import nn
from lure_verify.errors import (
    DimensionError,
    DomainError,
    NonFiniteEntryError,
    SectorViolationError,
    UnsupportedActivationError,
)
from lure_verify.nn import FeedforwardNet, SectorBound

from oracles import sector_bound_reference


def unit_bound():
    return SectorBound([[-1.0]], [[1.0]])


class TestActivations:
    @pytest.mark.parametrize("name, sector, c", [
        ("tanh", (0.0, 1.0), 1.0),
        ("relu", (0.0, 1.0), 1.0),
        ("leaky_relu", (0.01, 1.0), 1.0),
    ])
    def test_builtin_sectors(self, name, sector, c):
        act = nn.get_activation(name)
        assert act.sector == sector
        assert act.c == c
        assert act.strict
        nn.check_scalar_sector(act, *sector)

    def test_identity_is_degenerate(self):
        act = nn.get_activation("identity")
        assert not act.strict
        np.testing.assert_array_equal(act(np.array([-2.0, 3.0])), [-2.0, 3.0])

    def test_unknown(self):
        with pytest.raises(UnsupportedActivationError) as info:
            nn.get_activation("swish")
        assert "tanh" in info.value.details["known"]

    def test_register_custom(self):
        act = nn.register_activation("double_tanh", lambda x: 2 * np.tanh(x), (0.0, 2.0))
        assert act.c == 2.0
        assert nn.get_activation("double_tanh") is act

    def test_register_rejects_false_sector(self):
        with pytest.raises(SectorViolationError) as info:
            nn.register_activation("too_steep", lambda x: 3 * np.tanh(x), (0.0, 2.0))
        assert "point" in info.value.details

    def test_register_rejects_offset(self):
        with pytest.raises(SectorViolationError):
            nn.register_activation("shifted", lambda x: np.tanh(x) + 0.1, (0.0, 2.0))

    @pytest.mark.parametrize("sector", [(1.0, 1.0), (2.0, 1.0), (0.0, math.inf)])
    def test_register_rejects_bad_interval(self, sector):
        with pytest.raises(UnsupportedActivationError):
            nn.register_activation("bad", np.tanh, sector)

    def test_cannot_shadow_builtin(self):
        with pytest.raises(ValueError):
            nn.register_activation("tanh", np.tanh, (0.0, 1.0))

    def test_widen(self):
        tanh = nn.get_activation("tanh")
        assert nn.widen(tanh, (0.0, 1.0)) is tanh
        wide = nn.widen(tanh, (-0.5, 1.5))
        assert wide.sector == (-0.5, 1.5) and wide.c == 1.5
        with pytest.raises(UnsupportedActivationError):
            nn.widen(tanh, (0.0, 0.5))


class TestNetwork:
    def test_shape_chain(self):
        with pytest.raises(DimensionError) as info:
            FeedforwardNet([np.ones((3, 2)), np.ones((1, 4))])
        assert info.value.details["layer"] == 2

    def test_needs_hidden_layer(self):
        with pytest.raises(DimensionError):
            FeedforwardNet([np.ones((1, 2))])

    def test_non_finite_weights(self):
        with pytest.raises(NonFiniteEntryError):
            FeedforwardNet([[[np.nan]], [[1.0]]])

    def test_per_layer_activations(self):
        net = FeedforwardNet([[[1.0]], [[1.0]], [[1.0]]], ["tanh", "relu"])
        assert [a.name for a in net.activations] == ["tanh", "relu"]
        with pytest.raises(DimensionError):
            FeedforwardNet([[[1.0]], [[1.0]], [[1.0]]], ["tanh"])

    def test_properties(self):
        net = FeedforwardNet([np.ones((10, 2)), np.ones((15, 10)), np.ones((15, 15)),
                              np.ones((1, 15))])
        assert net.q == net.hidden_layer_count == 3
        assert net.input_width == 2 and net.output_width == 1
        assert net.architecture == [10, 15, 15, 1]
        assert "2->10/15/15/1" in repr(net)

    def test_weights_are_immutable_copies(self):
        w = np.ones((1, 1))
        net = FeedforwardNet([w, w])
        w[0, 0] = 5.0
        assert net.weights[0][0, 0] == 1.0
        with pytest.raises(ValueError):
            net.weights[0][0, 0] = 2.0

    def test_forward_examples(self):
        net = FeedforwardNet([[[1.0]], [[1.0]]], "tanh")
        np.testing.assert_array_equal(net([0.0]), [0.0])
        assert net([1.0])[0] == pytest.approx(0.7616, abs=1e-4)
        relu = FeedforwardNet([[[2.0], [-1.0]], [[1.0, 1.0]]], "relu")
        np.testing.assert_array_equal(relu([1.0]), [2.0])

    def test_forward_length_mismatch(self):
        net = FeedforwardNet([[[1.0]], [[1.0]]])
        with pytest.raises(DimensionError):
            net([1.0, 2.0])
        with pytest.raises(NonFiniteEntryError):
            net([np.inf])

    def test_batch_equals_columns(self):
        rng = np.random.default_rng(1)
        net = FeedforwardNet([rng.normal(size=(4, 3)), rng.normal(size=(2, 4))], "tanh")
        Z = rng.uniform(0, 3, size=(3, 6))
        U = net(Z)
        for j in range(6):
            np.testing.assert_allclose(U[:, j], net(Z[:, j]), rtol=1e-15)

    def test_scaled_output(self):
        net = FeedforwardNet([[[1.0]], [[2.0]]])
        scaled = net.scaled_output(3.0)
        assert scaled.weights[-1][0, 0] == 6.0
        assert net.weights[-1][0, 0] == 2.0


class TestSectorBound:
    def test_validation(self):
        with pytest.raises(DomainError):
            SectorBound([[1.0]], [[-1.0]])
        with pytest.raises(DimensionError):
            SectorBound([[0.0]], [[1.0, 1.0]])

    def test_equality_and_scaling(self):
        b = unit_bound()
        assert b == SectorBound(np.array([[-1.0]]), np.array([[1.0]]))
        assert b != b.scaled(2.0)
        assert b.scaled(2.0).upper[0, 0] == 2.0
        with pytest.raises(ValueError):
            b.scaled(0.5)

    def test_layer_examples(self):
        net = FeedforwardNet([[[1.0]], [[1.0]]], "tanh")
        assert nn.layer_sector_bound(net, 1) == unit_bound()
        net = FeedforwardNet([[[2.0]], [[-3.0]], [[1.0]]], "tanh")
        assert nn.layer_sector_bound(net, 2) == SectorBound([[-6.0]], [[6.0]])
        half = nn.Activation("half_tanh", 0.0, 0.5, lambda x: 0.5 * np.tanh(x))
        net = FeedforwardNet([[[4.0]], [[1.0]]], half)
        assert nn.layer_sector_bound(net, 1) == SectorBound([[-2.0]], [[2.0]])

    def test_layer_index_range(self):
        net = FeedforwardNet([[[1.0]], [[1.0]]])
        for i in (0, 2):
            with pytest.raises(IndexError):
                nn.layer_sector_bound(net, i)

    def test_network_examples(self):
        net = FeedforwardNet([[[1.0]], [[1.0]]], "tanh")
        assert nn.network_sector_bound(net) == unit_bound()
        net = FeedforwardNet([[[1.0], [1.0]], [[1.0, 1.0], [1.0, 1.0]], [[1.0, 1.0]]], "relu")
        assert nn.network_sector_bound(net) == SectorBound([[-4.0]], [[4.0]])

    def test_degenerate_sector(self):
        net = FeedforwardNet([[[1.0]], [[1.0]]], "identity")
        with pytest.raises(UnsupportedActivationError) as info:
            nn.network_sector_bound(net)
        assert info.value.details["layer"] == 1

    def test_c_per_layer(self):
        double = nn.Activation("double", 0.0, 2.0, lambda x: 2 * np.tanh(x))
        net = FeedforwardNet([[[1.0]], [[3.0]], [[1.0]]], [double, "tanh"])
        assert nn.network_sector_bound(net).upper[0, 0] == pytest.approx(6.0)

    def test_membership_examples(self):
        b = unit_bound()
        assert nn.check_sector_membership(b, [2.0], [1.5])
        assert not nn.check_sector_membership(b, [2.0], [2.5])
        assert nn.check_sector_membership(b, [0.0], [0.0])
        assert nn.check_sector_membership(b, [2.0], [2.0 + 1e-10])

    def test_membership_domain(self):
        with pytest.raises(DomainError):
            nn.check_sector_membership(unit_bound(), [-1.0], [0.0])
        with pytest.raises(DimensionError):
            nn.sector_margins(unit_bound(), np.ones((1, 3)), np.ones((1, 2)))

    def test_margins_batch(self):
        m = nn.sector_margins(unit_bound(), np.array([[1.0, 2.0, 3.0]]),
                              np.array([[0.0, 2.5, -3.0]]))
        np.testing.assert_allclose(m, [1.0, -0.5, 0.0])


weights = st.floats(-2, 2, allow_nan=False)


@st.composite
def nets(draw, max_q=3, max_width=5):
    q = draw(st.integers(1, max_q))
    widths = [draw(st.integers(1, max_width)) for _ in range(q + 2)]
    ws = [np.array(draw(st.lists(st.lists(weights, min_size=widths[i], max_size=widths[i]),
                                 min_size=widths[i + 1], max_size=widths[i + 1])))
          for i in range(q + 1)]
    act = draw(st.sampled_from(["tanh", "relu", "leaky_relu"]))
    return FeedforwardNet(ws, act)


class TestProperties:
    @settings(max_examples=150, deadline=None)
    @given(nets())
    def test_matches_reference_product(self, net):
        ref = sector_bound_reference(net.weights)
        bound = nn.network_sector_bound(net)
        np.testing.assert_allclose(bound.upper, ref, rtol=1e-12, atol=1e-300)
        np.testing.assert_array_equal(bound.lower, -bound.upper)

    @settings(max_examples=150, deadline=None)
    @given(nets(), st.integers(0, 2 ** 31))
    def test_sound_on_nonnegative_inputs(self, net, seed):
        rng = np.random.default_rng(seed)
        Z = rng.exponential(3.0, size=(net.input_width, 200))
        Z[:, :20] = 0.0
        bound = nn.network_sector_bound(net)
        assert nn.check_sector_membership(bound, Z, net(Z))

    @settings(max_examples=100, deadline=None)
    @given(nets(), st.floats(1.0, 10.0))
    def test_monotone_in_c(self, net, k):
        base = nn.network_sector_bound(net)
        wider = FeedforwardNet(net.weights, [nn.widen(a, (a.lo, a.c * k))
                                             for a in net.activations])
        assert np.all(nn.network_sector_bound(wider).upper >= base.upper)

    @settings(max_examples=100, deadline=None)
    @given(nets())
    def test_layer_bounds_chain(self, net):
        layers = nn.layer_sector_bounds(net)
        assert len(layers) == net.q
        for i, b in enumerate(layers, start=1):
            ref = sector_bound_reference(net.weights[:i]) if i > 1 else np.abs(net.weights[0])
            np.testing.assert_allclose(b.upper, ref, rtol=1e-12, atol=1e-300)

    @settings(max_examples=100, deadline=None)
    @given(nets())
    def test_deterministic(self, net):
        assert nn.network_sector_bound(net) == nn.network_sector_bound(net)

    def test_tanh_sector_tight_near_zero(self):
        net = FeedforwardNet([[[1.0]], [[1.0]]], "tanh")
        for z in (1e-1, 1e-3, 1e-6):
            assert net([z])[0] / z == pytest.approx(1.0, abs=z)
