#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: test/test_simulator.py
import numpy as np
import pytest

from tenbasis.basis import build_basis, project
from tenbasis.decomposition import cp_als
from tenbasis.exceptions import InvalidArgumentError
from tenbasis.params import AlsConfig
from tenbasis.simulator import SynthSpec, generate
from tenbasis.tensor import matricize


class TestSynthSpec:
    def test_default_names(self):
        spec = SynthSpec(design=('intercept', 'binary', 'continuous', 'binary'))
        assert spec.covariate_names == ['intercept', 'bin1', 'cont1', 'bin2']
        assert spec.p == 4

    @pytest.mark.parametrize('kwargs', [
        {'spatial_dims': (4, 4)},
        {'n_subjects': 0},
        {'rank': 0},
        {'design': ('intercept', 'ordinal')},
        {'noise_voxel_sd': -1.0},
        {'gamma_star_true': np.ones((2, 2))},
        {'covariate_names': ['a']},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            SynthSpec(**kwargs)


class TestGenerate:
    def test_shapes_and_design(self):
        data = generate(SynthSpec((5, 6, 4), 21, 2, ('intercept', 'binary', 'continuous'), seed=3))
        assert data.tensor.shape == (5, 6, 4, 21)
        assert data.design.shape == (21, 3)
        np.testing.assert_array_equal(data.design[:, 0], 1.0)
        assert set(np.unique(data.design[:, 1])) == {0.0, 1.0}
        assert data.design[:, 1].sum() == 10
        assert data.subject_ids[0] == 'sub-0001'
        assert data.truth.gamma_star.shape == (3, 2)
        for factor in data.truth.factors:
            np.testing.assert_allclose(np.linalg.norm(factor, axis=0), 1.0, atol=1e-12)

    def test_noiseless_tensor_is_exact_model(self):
        data = generate(SynthSpec((5, 6, 4), 12, 3, seed=4))
        Y4 = matricize(data.tensor, 3)
        np.testing.assert_allclose(Y4, data.design @ data.truth.gamma_star @ data.truth.loading, atol=1e-12)
        np.testing.assert_array_equal(data.truth.G, data.design @ data.truth.gamma_star)

    def test_deterministic(self):
        spec = SynthSpec((4, 4, 4), 10, 2, noise_subject_sd=0.1, noise_voxel_sd=0.1, seed=8)
        a, b = generate(spec), generate(spec)
        np.testing.assert_array_equal(a.tensor, b.tensor)
        c = generate(SynthSpec((4, 4, 4), 10, 2, noise_subject_sd=0.1, noise_voxel_sd=0.1, seed=9))
        assert not np.array_equal(a.tensor, c.tensor)

    def test_voxel_noise_level(self):
        kwargs = dict(spatial_dims=(10, 10, 10), n_subjects=20, rank=2, seed=1)
        clean = generate(SynthSpec(**kwargs))
        noisy = generate(SynthSpec(noise_voxel_sd=0.5, **kwargs))
        residual = noisy.tensor - clean.tensor
        assert residual.std() == pytest.approx(0.5, rel=0.03)

    def test_given_effects_are_used(self):
        gamma = np.array([[5.0, 5.0], [0.0, 0.0]])
        data = generate(SynthSpec((4, 4, 4), 10, 2, gamma_star_true=gamma, seed=2))
        np.testing.assert_array_equal(data.truth.gamma_star, gamma)
        maps = data.truth.coefficient_maps()
        assert maps.shape == (2, 64)
        np.testing.assert_array_equal(maps[1], 0.0)

    def test_noiseless_basis_recovery(self):
        spec = SynthSpec((10, 12, 8), 20, 3, ('intercept', 'continuous', 'continuous'), seed=6)
        data = generate(spec)
        model = cp_als(data.tensor, 3, AlsConfig(max_iters=1000, tol=1e-15))
        assert model.fit < 1e-8
        G = project(matricize(data.tensor, 3), build_basis(model))
        truth = data.truth.G / np.linalg.norm(data.truth.G, axis=0)
        cosines = np.abs((G / np.linalg.norm(G, axis=0)).T @ truth)
        assert np.all(cosines.max(axis=1) > 1 - 1e-6)
        assert sorted(cosines.argmax(axis=1).tolist()) == [0, 1, 2]
