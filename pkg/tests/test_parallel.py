import unittest

import numpy as np

from jetreg.dynamics import velocity_jets
from jetreg.image import AnalyticField
from jetreg.jet_state import init_grid
from jetreg.kernel import KernelSpec
from jetreg.matching import MatchConfig, match_endpoint_gradient, match_value, precompute_fixed
from jetreg.parallel import ROW_BLOCK, get_num_threads, map_row_blocks, row_blocks, set_num_threads
from jetreg.reg_types import Rectangle

UNIT = Rectangle.unit_square()


class TestRowBlocks(unittest.TestCase):

    def tearDown(self):
        set_num_threads(1)

    def test_blocks_cover_rows_in_order(self):
        blocks = row_blocks(150, 64)
        self.assertEqual([(b.start, b.stop) for b in blocks], [(0, 64), (64, 128), (128, 150)])
        self.assertEqual(row_blocks(0), [])

    def test_results_keep_block_order(self):
        set_num_threads(4)
        starts = map_row_blocks(lambda rows: rows.start, 5 * ROW_BLOCK)
        self.assertEqual(starts, [k * ROW_BLOCK for k in range(5)])

    def test_nested_calls_run_inline(self):
        set_num_threads(2)
        totals = map_row_blocks(lambda rows: sum(map_row_blocks(lambda inner: inner.stop - inner.start, 3 * ROW_BLOCK)),
                                4 * ROW_BLOCK)
        self.assertEqual(totals, [3 * ROW_BLOCK] * 4)

    def test_thread_count_validation(self):
        with self.assertRaises(ValueError):
            set_num_threads(0)
        set_num_threads(3)
        self.assertEqual(get_num_threads(), 3)

    def test_results_do_not_depend_on_thread_count(self):
        state = init_grid(UNIT, 9, 2)
        rng = np.random.default_rng(0)
        state.q[...] += 0.01 * rng.normal(size=state.q.shape)
        state.p[...] = 0.05 * rng.normal(size=state.p.shape)
        samples = precompute_fixed(AnalyticField("trig"), init_grid(UNIT, 9, 2).q)
        cfg = MatchConfig.for_grid(UNIT, 9, 2)
        spec = KernelSpec(0.2)

        def evaluate():
            value = match_value(samples, AnalyticField("quadratic"), state, cfg)
            lam = match_endpoint_gradient(samples, AnalyticField("quadratic"), state, cfg)
            return value, lam.q.copy(), velocity_jets(state, spec, 2)[1].copy()

        serial = evaluate()
        set_num_threads(4)
        threaded = evaluate()
        self.assertEqual(serial[0], threaded[0])
        np.testing.assert_array_equal(serial[1], threaded[1])
        np.testing.assert_array_equal(serial[2], threaded[2])


if __name__ == '__main__':
    unittest.main()
