#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: test/test_simbas.py
from collections import deque
from itertools import product

import numpy as np
import pytest

from tenbasis.basis import BasisMaps
from tenbasis.bayes import McmcChain, PriorSpec, run_sampler
from tenbasis.exceptions import DegeneratePosteriorError, InvalidArgumentError
from tenbasis.simbas import (ContrastSamples, ContrastSpec, apply_mask, contrast_samples, extract_clusters,
                             simbas)
from tenbasis.utils import derive_seed, random_state


def _moments(samples):
    return samples.mean(axis=0), samples.std(axis=0, ddof=1)


@pytest.fixture
def draws(rng):
    shift = np.zeros(50)
    shift[:10] = np.linspace(0.5, 5.0, 10)
    return shift + rng.standard_normal((200, 50))


def flood_fill_components(flags, connectivity):
    """reference labelling: breadth-first region growing over the neighbourhood offsets"""
    offsets = [d for d in product((-1, 0, 1), repeat=3) if any(d)]
    if connectivity == 6:
        offsets = [d for d in offsets if sum(map(abs, d)) == 1]
    seen = np.zeros(flags.shape, dtype=bool)
    components = []
    for start in zip(*np.nonzero(flags)):
        if seen[start]:
            continue
        seen[start] = True
        queue, members = deque([start]), []
        while queue:
            voxel = queue.popleft()
            members.append(voxel)
            for d in offsets:
                nb = tuple(v + o for v, o in zip(voxel, d))
                if all(0 <= c < s for c, s in zip(nb, flags.shape)) and flags[nb] and not seen[nb]:
                    seen[nb] = True
                    queue.append(nb)
        components.append(frozenset(tuple(int(c) for c in v) for v in members))
    return components


class TestContrastSpec:
    names = ['intercept', 'sex', 'age']

    def test_parse_all(self):
        specs = ContrastSpec.parse('all', self.names)
        assert [s.name for s in specs] == self.names
        np.testing.assert_array_equal(specs[1].weights, [0, 1, 0])

    def test_parse_column_name_case_insensitive(self):
        spec, = ContrastSpec.parse('SEX', self.names)
        assert spec.name == 'sex'
        np.testing.assert_array_equal(spec.weights, [0, 1, 0])

    def test_parse_weights(self):
        spec, = ContrastSpec.parse('0,1,-1', self.names)
        np.testing.assert_array_equal(spec.weights, [0, 1, -1])
        assert spec.name == 'c_0_1_-1'
        spec, = ContrastSpec.parse('diff=0, 1, -1', self.names)
        assert spec.name == 'diff'

    @pytest.mark.parametrize('text', ['0,1', 'height', '0,0,0'])
    def test_parse_errors(self, text):
        with pytest.raises(InvalidArgumentError):
            ContrastSpec.parse(text, self.names)


class TestContrastSamples:
    @pytest.mark.parametrize('chunk_size', [1, 7, 64, 1000])
    def test_streaming_moments_match_dense(self, rng, chunk_size):
        basis = BasisMaps(rng.standard_normal((3, 24)), (2, 3, 4))
        coeff = rng.standard_normal((150, 3)) + 2.0
        samples = ContrastSamples(coeff, basis, chunk_size=chunk_size)
        dense = coeff @ basis.loading
        np.testing.assert_allclose(samples.mean_map, dense.mean(axis=0), rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(samples.std_map, dense.std(axis=0, ddof=1), rtol=1e-10, atol=1e-12)
        np.testing.assert_array_equal(samples.dense(), dense)

    def test_contrast_of_chain(self, rng):
        gamma = rng.standard_normal((30, 2, 3))
        chain = McmcChain(gamma, np.tile(np.eye(3), (30, 1, 1)), 30, 0, 1, 0)
        basis = BasisMaps(rng.standard_normal((3, 8)), (2, 2, 2))
        samples = contrast_samples(chain, basis, ContrastSpec([1.0, -1.0]))
        np.testing.assert_allclose(samples.dense(), (gamma[:, 0] - gamma[:, 1]) @ basis.loading, atol=1e-12)

    def test_mismatched_shapes(self, rng):
        chain = McmcChain(rng.standard_normal((5, 2, 3)), np.tile(np.eye(3), (5, 1, 1)), 5, 0, 1, 0)
        with pytest.raises(InvalidArgumentError):
            contrast_samples(chain, BasisMaps(rng.standard_normal((2, 8)), (2, 2, 2)), ContrastSpec([1, 0]))
        with pytest.raises(InvalidArgumentError):
            contrast_samples(chain, BasisMaps(rng.standard_normal((3, 8)), (2, 2, 2)), ContrastSpec([1, 0, 0]))


class TestSimBaS:
    def test_matches_brute_force(self, draws):
        mean, std = _moments(draws)
        result = simbas(mean, std, draws, alpha=0.05)
        z = np.sort(np.max(np.abs(draws - mean) / std, axis=1))
        np.testing.assert_allclose(result.z_quantiles, z, rtol=1e-13)
        stat = np.abs(mean) / std
        expected = np.array([np.mean(z >= s) for s in stat])
        np.testing.assert_array_equal(result.psimbas_map, expected)
        assert np.all((result.psimbas_map >= 0) & (result.psimbas_map <= 1))

    def test_five_sample_hand_instance(self):
        mean = np.array([1.0, 0.0, 9.0, 4.0])
        std = np.array([1.0, 1.0, 2.0, 1.0])
        samples = np.array([[1.0, 0.0, 9.0, 4.0],
                            [2.0, 0.0, 9.0, 4.0],
                            [1.0, 2.0, 9.0, 4.0],
                            [1.0, 0.0, 15.0, 4.0],
                            [-3.0, 0.0, 9.0, 4.0]])
        result = simbas(mean, std, samples, alpha=0.25)
        np.testing.assert_array_equal(result.z_quantiles, [0.0, 1.0, 2.0, 3.0, 4.0])
        # ties between the statistic and a sample maximum count as exceedances
        np.testing.assert_array_equal(result.psimbas_map, [0.8, 1.0, 0.0, 0.2])
        np.testing.assert_array_equal(result.flags, [False, False, True, True])
        assert result.quantile() == 3.0

    def test_p_value_nonincreasing_in_statistic(self, draws):
        mean, std = _moments(draws)
        result = simbas(mean, std, draws)
        order = np.argsort(result.statistic, kind='stable')
        assert np.all(np.diff(result.psimbas_map[order]) <= 0.0)

    def test_flags_agree_with_band(self, draws):
        mean, std = _moments(draws)
        result = simbas(mean, std, draws)
        for alpha in (0.2, 0.1, 0.05, 0.01):
            np.testing.assert_array_equal(result.flags_at(alpha), result.excludes_zero(alpha))
            lower, upper = result.band(alpha)
            outside = (lower > 0) | (upper < 0)
            np.testing.assert_array_equal(result.flags_at(alpha), outside)
        assert result.flags[:3].sum() < result.flags[7:10].sum()
        assert not result.flags[10:].any()

    def test_quantile_order_statistic(self):
        samples = np.vstack([np.arange(1.0, 101.0), -np.arange(1.0, 101.0)]).T
        mean = np.zeros(2)
        result = simbas(mean, np.ones(2), samples, alpha=0.05)
        # at most 4 exceedances out of 100 stay below alpha = 0.05, so k = 96
        assert result.quantile() == 96.0
        assert result.quantile(0.5) == 51.0

    def test_scale_invariance(self, draws):
        mean, std = _moments(draws)
        base = simbas(mean, std, draws)
        scaled = simbas(2.0 * mean, 2.0 * std, 2.0 * draws)
        np.testing.assert_array_equal(base.psimbas_map, scaled.psimbas_map)
        np.testing.assert_array_equal(base.z_quantiles, scaled.z_quantiles)

    def test_zero_mean_voxel_never_flagged(self):
        samples = np.array([[1.0, 3.0], [-1.0, 4.0], [2.0, 5.0], [-2.0, 3.5], [0.0, 4.5]])
        mean, std = _moments(samples)
        result = simbas(mean, std, samples, alpha=0.5)
        assert result.psimbas_map[0] == 1.0
        assert not result.flags[0]

    def test_zero_std_voxel_uses_floor(self, rng):
        samples = rng.standard_normal((50, 3))
        samples[:, 2] = 4.0
        mean, std = _moments(samples)
        result = simbas(mean, std, samples)
        assert result.scale_map[2] == pytest.approx(1e-12 * std[:2].max())
        assert result.psimbas_map[2] == 0.0

    def test_mask_restricts_maximum(self, draws):
        mean, std = _moments(draws)
        mask = np.zeros(50, dtype=bool)
        mask[5:30] = True
        full = simbas(mean, std, draws)
        masked = simbas(mean, std, draws, mask=mask)
        assert np.all(masked.z_quantiles <= full.z_quantiles)
        assert np.all(masked.psimbas_map[~mask] == 1.0)
        assert not masked.flags[~mask].any()

    def test_streamed_samples_match_array(self, rng):
        basis = BasisMaps(rng.standard_normal((3, 24)), (2, 3, 4))
        coeff = rng.standard_normal((300, 3)) + np.array([3.0, 0.0, 0.0])
        streamed = ContrastSamples(coeff, basis, chunk_size=32)
        a = simbas(streamed.mean_map, streamed.std_map, streamed)
        b = simbas(streamed.mean_map, streamed.std_map, streamed.dense())
        np.testing.assert_allclose(a.z_quantiles, b.z_quantiles, rtol=1e-12)
        np.testing.assert_array_equal(a.psimbas_map, b.psimbas_map)

    def test_errors(self, draws):
        mean, std = _moments(draws)
        with pytest.raises(InvalidArgumentError):
            simbas(mean, std, draws, alpha=1.0)
        with pytest.raises(InvalidArgumentError):
            simbas(mean, std, draws[:1])
        with pytest.raises(InvalidArgumentError):
            simbas(mean[:-1], std, draws)
        with pytest.raises(DegeneratePosteriorError):
            simbas(mean, np.zeros(50), draws)
        with pytest.raises(DegeneratePosteriorError):
            simbas(mean, std, draws, mask=np.zeros(50, dtype=bool))

    def test_apply_mask(self):
        volume = np.zeros((2, 3, 2))
        volume[1, 0, 0] = 1.0
        volume[0, 2, 1] = 1.0
        flat = apply_mask(volume != 0, (2, 3, 2))
        assert np.flatnonzero(flat).tolist() == [1, 10]
        with pytest.raises(InvalidArgumentError):
            apply_mask(volume != 0, (3, 2, 2))
        with pytest.raises(DegeneratePosteriorError):
            apply_mask(np.zeros((2, 3, 2)), (2, 3, 2))

    @pytest.mark.slow
    def test_null_contrast_rarely_flags(self):
        gen = random_state(31)
        n, rank, dims = 40, 4, (6, 6, 5)
        Z = np.column_stack([np.ones(n), np.repeat([0.0, 1.0], n // 2)])
        basis = BasisMaps(gen.standard_normal((rank, int(np.prod(dims)))), dims)
        contrast = ContrastSpec([0.0, 1.0], 'group')
        clean = 0
        for rep in range(100):
            G = gen.standard_normal((n, rank))
            chain = run_sampler(G, Z, PriorSpec.default(2, rank), n_total=1100, burn_in=100,
                                seed=derive_seed(5, rep))
            samples = contrast_samples(chain, basis, contrast)
            result = simbas(samples.mean_map, samples.std_map, samples, alpha=0.01)
            clean += not result.flags.any()
        assert clean >= 99


class TestClusters:
    def _as_sets(self, clusters):
        return {frozenset(map(tuple, c.voxel_indices.tolist())) for c in clusters}

    @pytest.mark.parametrize('connectivity', [6, 26])
    def test_matches_flood_fill(self, connectivity):
        gen = random_state(12)
        for _ in range(4):
            flags = gen.uniform(size=(12, 12, 12)) < 0.25
            expected = flood_fill_components(flags, connectivity)
            clusters = extract_clusters(flags, min_size=1, connectivity=connectivity)
            assert self._as_sets(clusters) == set(expected)
            sizes = [c.size for c in clusters]
            assert sizes == sorted(sizes, reverse=True)
            assert sum(sizes) == int(flags.sum())

    @pytest.mark.slow
    @pytest.mark.parametrize('connectivity', [6, 26])
    def test_matches_flood_fill_large(self, connectivity):
        gen = random_state(99)
        for _ in range(50):
            flags = gen.uniform(size=(20, 20, 20)) < 0.3
            assert self._as_sets(extract_clusters(flags, 1, connectivity)) == \
                set(flood_fill_components(flags, connectivity))

    def test_diagonal_neighbours(self):
        flags = np.zeros((3, 3, 3), dtype=bool)
        flags[0, 0, 0] = flags[1, 1, 1] = True
        assert len(extract_clusters(flags, 1, 6)) == 2
        assert len(extract_clusters(flags, 1, 26)) == 1

    def test_min_size_threshold(self):
        flags = np.zeros((9, 9, 9), dtype=bool)
        flags[2:7, 2:7, 2:7] = True
        assert [c.size for c in extract_clusters(flags, min_size=125)] == [125]
        assert extract_clusters(flags, min_size=126) == []

    def test_peak_voxel(self):
        flags = np.zeros((4, 4, 4), dtype=bool)
        flags[1:3, 1:3, 1] = True
        mean = np.zeros((4, 4, 4))
        mean[2, 1, 1] = -3.0
        mean[1, 1, 1] = 2.0
        cluster, = extract_clusters(flags, min_size=1, mean_map=mean)
        assert cluster.peak_voxel == (2, 1, 1)
        assert cluster.peak_value == -3.0

    def test_empty_and_invalid(self):
        assert extract_clusters(np.zeros((2, 2, 2), dtype=bool)) == []
        with pytest.raises(InvalidArgumentError):
            extract_clusters(np.zeros((2, 2)), 1)
        with pytest.raises(InvalidArgumentError):
            extract_clusters(np.zeros((2, 2, 2)), 1, connectivity=18)
