import numpy as np
import pytest

from warpdraw.butterfly import (
    Replacement,
    SpanSum,
    apply_replacement_sets,
    entry_oracle,
    entry_span,
    final_symbolic,
    replace_four,
    replacement_schedule,
    singleton_grid,
)


class TestReplaceFour:
    def test_numeric(self):
        assert replace_four(1, 2, 3, 4) == (1, 4, 3, 7)

    def test_zero_fixed_point(self):
        assert replace_four(0, 0, 0, 0) == (0, 0, 0, 0)

    def test_symbolic(self):
        a, b = SpanSum(0, 0, 0), SpanSum(0, 1, 1)
        c, d = SpanSum(1, 0, 0), SpanSum(1, 1, 1)
        na, nb, nc, nd = replace_four(a, b, c, d)
        assert (na, nb) == (SpanSum(0, 0, 0), SpanSum(1, 1, 1))
        assert (nc, nd) == (SpanSum(0, 0, 1), SpanSum(1, 0, 1))


class TestSchedule:
    def test_w8_row_pairs(self):
        sets = replacement_schedule(8)
        assert [sorted({(r.i, r.j) for r in s}) for s in sets] == [
            [(0, 1), (2, 3), (4, 5), (6, 7)],
            [(1, 3), (5, 7)],
            [(3, 7)],
        ]

    def test_w8_column_pairs_per_set(self):
        sets = replacement_schedule(8)
        assert sorted({(r.k, r.l) for r in sets[0]}) == [(0, 1), (2, 3), (4, 5), (6, 7)]
        assert sorted({(r.k, r.l) for r in sets[1]}) == [(0, 2), (1, 3), (4, 6), (5, 7)]
        assert sorted({(r.k, r.l) for r in sets[2]}) == [(0, 4), (1, 5), (2, 6), (3, 7)]

    def test_w2_single_set(self):
        assert replacement_schedule(2) == [[Replacement(0, 1, 0, 1)]]

    @pytest.mark.parametrize("lanes", [2, 4, 8, 16, 32, 64])
    def test_total_replacements_per_column_pair(self, lanes):
        # W/2 + W/4 + ... + 1 = W - 1 row pairs over all sets.
        sets = replacement_schedule(lanes)
        total_rows = sum(len({(r.i, r.j) for r in s}) for s in sets)
        assert total_rows == lanes - 1
        # each set pairs every column exactly once
        for s in sets:
            cols = sorted(sum(((r.k, r.l) for r in s), ()))
            assert cols == sorted(list(range(lanes)) * (len(s) // (lanes // 2)))

    def test_pair_distance_is_the_set_bit(self):
        for lanes in (4, 8, 16):
            for b, s in enumerate(replacement_schedule(lanes)):
                for r in s:
                    assert r.j - r.i == r.l - r.k == 1 << b

    def test_non_power_of_two_rejected(self):
        with pytest.raises(ValueError):
            replacement_schedule(12)


class TestEntrySpan:
    def test_row3_col5_w8(self):
        # after all sets, (3, 5) holds document 5's span over topics 4..7
        assert entry_span(3, 5, 8) == (5, 4, 7)

    def test_row0_col1_w8(self):
        assert entry_span(0, 1, 8) == (1, 1, 1)

    def test_bottom_row_is_full_prefix(self):
        for j in range(8):
            assert entry_span(7, j, 8) == (j, 0, 7)

    def test_oracle_direct_sum(self):
        gen = np.random.default_rng(42)
        products = gen.uniform(0, 1, size=(8, 8))
        got = entry_oracle(3, 5, 8, products)
        assert got == pytest.approx(products[5, 4:8].sum(), rel=1e-15)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            entry_span(8, 0, 8)


class TestSymbolicReplay:
    @pytest.mark.parametrize("lanes", [2, 4, 8, 16, 32])
    def test_final_state_matches_closed_form(self, lanes):
        grid = singleton_grid(lanes)
        snapshots = apply_replacement_sets(grid, replacement_schedule(lanes))
        assert len(snapshots) == lanes.bit_length() - 1
        assert snapshots[-1] == final_symbolic(lanes)

    def test_every_merge_is_adjacent(self):
        # SpanSum.__add__ raises on non-adjacent or cross-document merges,
        # so a clean replay certifies the schedule's data flow.
        grid = singleton_grid(16)
        apply_replacement_sets(grid, replacement_schedule(16))

    def test_numeric_replay_equals_symbolic_spans(self):
        gen = np.random.default_rng(0)
        lanes = 8
        products = gen.uniform(0, 1, size=(lanes, lanes))
        grid = [[products[row][col] for col in range(lanes)] for row in range(lanes)]
        snapshots = apply_replacement_sets(grid, replacement_schedule(lanes))
        for i in range(lanes):
            for j in range(lanes):
                doc, lo, hi = entry_span(i, j, lanes)
                assert snapshots[-1][i][j] == pytest.approx(
                    products[doc, lo : hi + 1].sum(), rel=1e-12
                )

    def test_span_sum_rejects_bad_merges(self):
        with pytest.raises(ValueError):
            SpanSum(0, 0, 1) + SpanSum(1, 2, 3)
        with pytest.raises(ValueError):
            SpanSum(0, 0, 1) + SpanSum(0, 3, 4)
