import functools
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modrelay.channel import Dmc, RelayChannelSpec, bsc_relay
from modrelay.converse import (
    ENUM_GUARD,
    RelayEncoderTable,
    block_entropy_of_noise,
    conditional_entropy_exact,
    conditional_entropy_stochastic,
    encoder_count,
    enumerate_encoders,
    verify_lemma1,
)
from modrelay.errors import GuardError, ValidationError
from modrelay.info import Channel, Pmf, binary_entropy

REFERENCE = bsc_relay(0.5, 0.1, 0.11)


def direct_sum_n1(p, delta, eps, table):
    """H(Z|S) by plain summation over (z, y1, s)."""
    pz = [1 - p, p]
    obs = [[1 - delta, delta], [delta, 1 - delta]]
    link = [[1 - eps, eps], [eps, 1 - eps]]
    joint = {}
    for z, y1, s in itertools.product(range(2), repeat=3):
        joint[z, s] = joint.get((z, s), 0.0) + pz[z] * obs[z][y1] * link[table[y1]][s]
    h = 0.0
    for s in range(2):
        ps = joint[0, s] + joint[1, s]
        for z in range(2):
            if joint[z, s] > 0:
                h -= joint[z, s] * math.log2(joint[z, s] / ps)
    return h


@functools.lru_cache(maxsize=None)
def deterministic_minimum():
    return verify_lemma1(REFERENCE, 2, keep_values=True).values.min()


class TestEnumeration:
    def test_counts(self):
        assert encoder_count(1, REFERENCE) == 4
        assert encoder_count(2, REFERENCE) == 256
        assert len(list(enumerate_encoders(1, REFERENCE))) == 4
        assert len(list(enumerate_encoders(2, REFERENCE))) == 256

    def test_guard_boundary(self):
        assert encoder_count(3, REFERENCE) == ENUM_GUARD
        next(enumerate_encoders(3, REFERENCE))
        wider = RelayChannelSpec(2, Pmf.uniform(2), Channel.bsc(0.1), Dmc(Channel([[1, 0, 0], [0, 1, 0], [0, 0, 1]])))
        assert encoder_count(3, wider) > ENUM_GUARD
        with pytest.raises(GuardError):
            next(enumerate_encoders(3, wider))
        with pytest.raises(GuardError):
            verify_lemma1(REFERENCE, 4)

    def test_lexicographic(self):
        tables = [tuple(e.table) for e in enumerate_encoders(1, REFERENCE)]
        assert tables == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_needs_link_channel(self):
        with pytest.raises(ValidationError):
            encoder_count(2, REFERENCE.with_rate(0.5))


class TestExactEntropy:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_constant_encoder(self, n):
        enc = RelayEncoderTable(n, np.zeros(2 ** n, dtype=int))
        assert conditional_entropy_exact(REFERENCE, enc) == pytest.approx(n * 1.0, abs=1e-12)
        assert block_entropy_of_noise(REFERENCE, n) == pytest.approx(n * 1.0, abs=1e-12)

    def test_perfect_relay(self):
        spec = bsc_relay(0.5, 0.0, 0.0)
        enc = RelayEncoderTable(2, np.arange(4))
        assert conditional_entropy_exact(spec, enc) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("table", [(0, 0), (0, 1), (1, 0), (1, 1)])
    def test_single_letter_against_summation(self, table):
        value = conditional_entropy_exact(REFERENCE, RelayEncoderTable(1, np.array(table)))
        assert value == pytest.approx(direct_sum_n1(0.5, 0.1, 0.11, table), abs=1e-12)

    def test_identity_single_letter_in_open_interval(self):
        value = conditional_entropy_exact(REFERENCE, RelayEncoderTable(1, np.array([0, 1])))
        assert 0.0 < value < 1.0

    def test_tensorization(self):
        single = conditional_entropy_exact(REFERENCE, RelayEncoderTable(1, np.array([0, 1])))
        double = conditional_entropy_exact(REFERENCE, RelayEncoderTable(2, np.arange(4)))
        assert double == pytest.approx(2 * single, abs=1e-12)

    def test_bad_table(self):
        with pytest.raises(ValidationError):
            conditional_entropy_exact(REFERENCE, RelayEncoderTable(2, np.array([0, 1, 2, 9])))
        with pytest.raises(ValidationError):
            conditional_entropy_exact(REFERENCE, RelayEncoderTable(2, np.array([0, 1])))

    @settings(max_examples=30)
    @given(st.lists(st.floats(0.0, 1.0), min_size=16, max_size=16).filter(lambda v: min(
        sum(v[i:i + 4]) for i in range(0, 16, 4)) > 1e-3))
    def test_stochastic_no_better_than_deterministic(self, vals):
        relay = np.array(vals).reshape(4, 4)
        relay /= relay.sum(axis=1, keepdims=True)
        assert conditional_entropy_stochastic(REFERENCE, 2, relay) >= deterministic_minimum() - 1e-12


class TestVerification:
    @pytest.mark.parametrize("args", [(0.5, 0.1, 0.11), (0.5, 0.25, 0.2), (0.3, 0.1, 0.11)])
    def test_passes(self, args):
        rep = verify_lemma1(bsc_relay(*args), 2)
        assert rep.passed and rep.encoder_count == 256
        assert rep.min_conditional_entropy >= rep.bound - 1e-9
        assert not rep.conservative

    def test_useless_observation_equality(self):
        rep = verify_lemma1(bsc_relay(0.3, 0.5, 0.1), 2)
        assert rep.passed
        assert rep.min_conditional_entropy == pytest.approx(2 * binary_entropy(0.3), abs=1e-12)
        assert rep.margin == pytest.approx(0.0, abs=1e-12)

    def test_useless_link_equality(self):
        rep = verify_lemma1(bsc_relay(0.3, 0.1, 0.5), 2)
        assert rep.passed and rep.margin == pytest.approx(0.0, abs=1e-12)

    def test_worst_encoder_reproduces_minimum(self):
        rep = verify_lemma1(REFERENCE, 2, keep_values=True)
        assert conditional_entropy_exact(REFERENCE, rep.worst_encoder) == pytest.approx(
            rep.min_conditional_entropy, abs=1e-14)
        assert rep.values.shape == (256,)

    def test_values_follow_enumeration_order(self):
        rep = verify_lemma1(REFERENCE, 1, keep_values=True)
        direct = [conditional_entropy_exact(REFERENCE, e) for e in enumerate_encoders(1, REFERENCE)]
        np.testing.assert_allclose(rep.values, direct, atol=1e-14)
