import numpy as np
import pytest

from osiwae.params import (ALL_BLOCKS, MODEL_BLOCK, PROPOSAL_BLOCK, GradientEstimate,
                           ParamVector, restrict_to_blocks)


class TestParamVector:
    def test_blocks_partition_the_vector(self):
        theta = ParamVector(np.arange(5.0), n_model=2)
        assert theta.model.tolist() == [0.0, 1.0]
        assert theta.proposal.tolist() == [2.0, 3.0, 4.0]
        assert theta.n_proposal == 3
        # the two ranges are disjoint and cover every index exactly once
        covered = list(range(*theta.block_slice(MODEL_BLOCK).indices(theta.size)))
        covered += list(range(*theta.block_slice(PROPOSAL_BLOCK).indices(theta.size)))
        assert sorted(covered) == list(range(theta.size))

    def test_empty_blocks_are_allowed(self):
        assert ParamVector(np.ones(3), n_model=0).n_proposal == 3
        assert ParamVector(np.ones(3), n_model=3).n_proposal == 0

    def test_rejects_empty_vector(self):
        with pytest.raises(ValueError):
            ParamVector(np.zeros(0), n_model=0)

    def test_rejects_bad_partition(self):
        with pytest.raises(ValueError):
            ParamVector(np.zeros(3), n_model=4)

    def test_copy_is_independent(self):
        theta = ParamVector(np.zeros(3), n_model=1)
        clone = theta.copy()
        clone.values[0] = 5.0
        assert theta.values[0] == 0.0


class TestGradientEstimate:
    def test_discipline_catches_leaks(self):
        theta = ParamVector(np.zeros(4), n_model=2)
        bad = GradientEstimate(np.array([0.0, 0.0, 1.0, 0.0]), frozenset({MODEL_BLOCK}))
        with pytest.raises(ValueError):
            bad.check_discipline(theta)
        ok = GradientEstimate(np.array([1.0, 2.0, 0.0, 0.0]), frozenset({MODEL_BLOCK}))
        ok.check_discipline(theta)

    def test_unknown_block_rejected(self):
        with pytest.raises(ValueError):
            GradientEstimate(np.zeros(2), frozenset({"bogus"}))

    def test_restrict_zeroes_other_block(self):
        theta = ParamVector(np.zeros(4), n_model=2)
        values = np.array([1.0, 2.0, 3.0, 4.0])
        out = restrict_to_blocks(values, theta, (PROPOSAL_BLOCK,))
        assert out.tolist() == [0.0, 0.0, 3.0, 4.0]
        both = restrict_to_blocks(values, theta, ALL_BLOCKS)
        assert both.tolist() == values.tolist()
