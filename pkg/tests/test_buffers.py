import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chdlink.buffers import BufferBank, BufferContractError, PacketGroup


def _group(ms=2, t=4, tag=0):
    bits = np.full((ms, t), tag % 2, dtype=np.uint8)
    return PacketGroup(payload=bits, truth_x1=bits.copy(),
                       truth_x2=bits.copy(), birth_slot=0)


class TestStore:
    def test_counts_packets(self):
        bank = BufferBank(clusters=2, capacity=6, group_size=2)
        assert bank.store(0, _group(), slot=0) == 2

    def test_capacity_bound(self):
        bank = BufferBank(clusters=1, capacity=6, group_size=2)
        for slot in range(3):
            bank.store(0, _group(), slot=slot)
        assert bank.occupancy(0) == 6
        with pytest.raises(BufferContractError):
            bank.store(0, _group(), slot=3)

    def test_birth_slot_stamped(self):
        bank = BufferBank(clusters=1, capacity=6, group_size=2)
        g = _group()
        bank.store(0, g, slot=3)
        assert g.birth_slot == 3


class TestExtract:
    def test_delay_is_slot_difference(self):
        bank = BufferBank(clusters=1, capacity=6, group_size=2)
        bank.store(0, _group(), slot=3)
        _, delays = bank.extract(0, slot=5)
        assert np.array_equal(delays, [2, 2])

    def test_immediate_next_slot_delay_one(self):
        bank = BufferBank(clusters=1, capacity=6, group_size=2)
        bank.store(0, _group(), slot=7)
        _, delays = bank.extract(0, slot=8)
        assert np.array_equal(delays, [1, 1])

    def test_fifo_order(self):
        bank = BufferBank(clusters=1, capacity=6, group_size=2)
        bank.store(0, _group(tag=0), slot=1)
        bank.store(0, _group(tag=1), slot=2)
        group, _ = bank.extract(0, slot=3)
        assert group.birth_slot == 1

    def test_underflow_is_fatal(self):
        bank = BufferBank(clusters=1, capacity=6, group_size=2)
        with pytest.raises(BufferContractError):
            bank.extract(0, slot=0)


class TestSummary:
    def test_totals_and_fullest(self):
        bank = BufferBank(clusters=3, capacity=10, group_size=1)
        for _ in range(2):
            bank.store(0, _group(ms=1), slot=0)
        for _ in range(5):
            bank.store(1, _group(ms=1), slot=0)
        bank.store(2, _group(ms=1), slot=0)
        s = bank.summary()
        assert np.array_equal(s.occupancy, [2, 5, 1])
        assert s.total == 8
        assert s.fullest == 1

    def test_all_empty_tie_break(self):
        s = BufferBank(clusters=3, capacity=6, group_size=2).summary()
        assert s.total == 0 and s.fullest == 0

    def test_equal_occupancy_tie_break(self):
        bank = BufferBank(clusters=2, capacity=8, group_size=2)
        for k in (0, 1):
            for _ in range(2):
                bank.store(k, _group(), slot=0)
        assert bank.summary().fullest == 0


def test_capacity_must_be_group_multiple():
    with pytest.raises(ValueError):
        BufferBank(clusters=1, capacity=5, group_size=2)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.booleans(), max_size=60))
def test_fifo_and_conservation_over_random_traces(ops):
    """store/extract traces preserve FIFO order and packet conservation."""
    bank = BufferBank(clusters=1, capacity=8, group_size=2)
    stored, extracted = [], []
    slot = 0
    for is_store in ops:
        slot += 1
        if is_store and bank.occupancy(0) + 2 <= 8:
            g = _group()
            bank.store(0, g, slot=slot)
            stored.append(g.birth_slot)
        elif not is_store and bank.occupancy(0) >= 2:
            g, delays = bank.extract(0, slot=slot)
            extracted.append(g.birth_slot)
            assert np.all(delays >= 1)  # store and extract never share a slot
    assert extracted == stored[: len(extracted)]
    assert 2 * (len(stored) - len(extracted)) == bank.summary().total
