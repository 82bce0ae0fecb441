#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: test/test_fileio.py
import gzip
import struct

import numpy as np
import pytest

from tenbasis.bayes import McmcChain
from tenbasis.exceptions import (CompressedNiftiError, IngestionError, InvalidArgumentError,
                                 NiftiDimensionError, NiftiHeaderError, NiftiScalingError, TensorFormatError,
                                 UnsupportedDatatypeError)
from tenbasis.fileio import (load_response, read_chain, read_covariates, read_cp_model, read_nifti1,
                             read_nifti_list, read_tensor, write_chain, write_covariates, write_cp_model,
                             write_nifti1, write_tensor)


def _tensor_bytes(dims, values=None, version=1, reserved=bytes(6)):
    values = np.arange(float(np.prod(dims))) if values is None else values
    return (b'TNSR' + bytes([version, len(dims)]) + reserved + np.asarray(dims, dtype='<u8').tobytes()
            + np.asarray(values, dtype='<f8').tobytes())


class TestTensorFile:
    def test_round_trip_is_bit_exact(self, tmp_path, rng):
        t = rng.standard_normal((3, 4, 2, 5))
        t[0, 0, 0, 0] = -0.0
        t[1, 2, 1, 3] = 1e-310
        fn = write_tensor(str(tmp_path / 't.tnsr'), t)
        back = read_tensor(fn)
        assert back.shape == t.shape
        assert back.tobytes(order='F') == t.tobytes(order='F')

    def test_layout(self, tmp_path):
        fn = write_tensor(str(tmp_path / 't.tnsr'), np.arange(6.0).reshape((2, 3), order='F'))
        raw = open(fn, 'rb').read()
        assert raw[:12] == b'TNSR\x01\x02' + bytes(6)
        assert struct.unpack('<2Q', raw[12:28]) == (2, 3)
        assert struct.unpack('<6d', raw[28:]) == (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)

    @pytest.mark.parametrize('raw, offset', [
        (b'TNSX' + bytes(8), 0),
        (_tensor_bytes((2,), version=2), 4),
        (b'TNSR\x01\x00' + bytes(6), 5),
        (_tensor_bytes((2,), reserved=b'\x00\x00\x00\x07\x00\x00'), 9),
        (_tensor_bytes((2, 3))[:24], 20),
        (_tensor_bytes((2, 0), values=[]), 20),
        (_tensor_bytes((2, 2, 2, 2), values=np.zeros(15)), 164),
        (_tensor_bytes((2, 3)) + b'\x00\x00\x00', 76),
    ])
    def test_malformed_offsets(self, tmp_path, raw, offset):
        fn = tmp_path / 'bad.tnsr'
        fn.write_bytes(raw)
        with pytest.raises(TensorFormatError) as info:
            read_tensor(str(fn))
        assert info.value.offset == offset


class TestModelFiles:
    def test_cp_model_round_trip(self, tmp_path, make_cp_model):
        model = make_cp_model((3, 4, 2, 6), 2)
        model.fit, model.fit_trace = 0.125, [0.5, 0.125]
        write_cp_model(model, str(tmp_path))
        back = read_cp_model(str(tmp_path))
        np.testing.assert_array_equal(back.weights, model.weights)
        for a, b in zip(back.factors, model.factors):
            np.testing.assert_array_equal(a, b)
        assert back.fit == 0.125
        assert back.fit_trace == [0.5, 0.125]

    def test_chain_round_trip(self, tmp_path, rng):
        chain = McmcChain(rng.standard_normal((4, 2, 3)), rng.standard_normal((4, 3, 3)), 14, 10, 1, 77,
                          ['intercept', 'sex'])
        write_chain(chain, str(tmp_path))
        back = read_chain(str(tmp_path))
        np.testing.assert_array_equal(back.gamma_star, chain.gamma_star)
        np.testing.assert_array_equal(back.sigma, chain.sigma)
        assert (back.n_total, back.burn_in, back.thin, back.seed) == (14, 10, 1, 77)
        assert back.covariate_names == ['intercept', 'sex']

    def test_single_draw_chain_keeps_shape(self, tmp_path, rng):
        chain = McmcChain(rng.standard_normal((1, 1, 2)), rng.standard_normal((1, 2, 2)), 2, 1, 1, 0)
        write_chain(chain, str(tmp_path))
        assert read_chain(str(tmp_path)).gamma_star.shape == (1, 1, 2)


class TestCovariates:
    def test_round_trip(self, tmp_path, rng):
        Z = rng.standard_normal((5, 2))
        ids = [f's{i}' for i in range(5)]
        fn = write_covariates(str(tmp_path / 'cov.csv'), Z, ['age', 'score'], ids)
        back, names, back_ids = read_covariates(fn, intercept=False)
        np.testing.assert_array_equal(back, Z)
        assert names == ['age', 'score']
        assert back_ids == ids

    def test_intercept_prepended(self, tmp_path):
        fn = tmp_path / 'cov.csv'
        fn.write_text('subject_id,sex\na,0\nb,1\n')
        Z, names, _ = read_covariates(str(fn))
        assert names == ['intercept', 'sex']
        np.testing.assert_array_equal(Z, [[1, 0], [1, 1]])

    def test_reordered_to_tensor_subjects(self, tmp_path):
        fn = tmp_path / 'cov.csv'
        fn.write_text('subject_id,sex\na,0\nb,1\nc,2\n')
        Z, _, ids = read_covariates(str(fn), intercept=False, subject_order=['c', 'a', 'b'])
        assert ids == ['c', 'a', 'b']
        np.testing.assert_array_equal(Z[:, 0], [2, 0, 1])
        Z, _, ids = read_covariates(str(fn), intercept=False, subject_order={'a': 2, 'b': 0, 'c': 1})
        assert ids == ['b', 'c', 'a']

    @pytest.mark.parametrize('text, row, column', [
        ('subject_id,sex\na,0\nb,1\na,1\n', 3, 'subject_id'),
        ('subject_id,sex,age\na,0,30\nb,male,31\n', 2, 'sex'),
        ('subject_id,sex\na,0\nb,\n', 2, 'sex'),
    ])
    def test_bad_rows(self, tmp_path, text, row, column):
        fn = tmp_path / 'cov.csv'
        fn.write_text(text)
        with pytest.raises(IngestionError) as info:
            read_covariates(str(fn))
        assert (info.value.row, info.value.column) == (row, column)

    def test_subject_mismatch(self, tmp_path):
        fn = tmp_path / 'cov.csv'
        fn.write_text('subject_id,sex\na,0\nb,1\n')
        with pytest.raises(IngestionError):
            read_covariates(str(fn), subject_order=['a', 'z'])
        with pytest.raises(IngestionError):
            read_covariates(str(fn), n_subjects=3)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError, match='nope.csv'):
            read_covariates(str(tmp_path / 'nope.csv'))


class TestNifti:
    def test_hand_built_fixture(self, tmp_path, nifti_bytes):
        values = np.arange(1.0, 9.0).reshape((2, 2, 2), order='F')
        fn = tmp_path / 'v.nii'
        fn.write_bytes(nifti_bytes(values, pixdim=(2.0, 2.5, 3.0)))
        volume, sizes = read_nifti1(str(fn))
        np.testing.assert_array_equal(volume, values)
        assert volume[1, 0, 0] == 2.0
        assert sizes == (2.0, 2.5, 3.0)

    def test_float64_fixture(self, tmp_path, nifti_bytes):
        values = np.linspace(-1.0, 1.0, 24).reshape((2, 3, 4), order='F')
        fn = tmp_path / 'v.nii'
        fn.write_bytes(nifti_bytes(values, dims=(2, 3, 4), datatype=64))
        np.testing.assert_array_equal(read_nifti1(str(fn))[0], values)

    def test_unset_scaling_is_accepted(self, tmp_path, nifti_bytes):
        fn = tmp_path / 'v.nii'
        fn.write_bytes(nifti_bytes(np.ones(8), scl_slope=0.0, scl_inter=0.0))
        np.testing.assert_array_equal(read_nifti1(str(fn))[0], 1.0)

    @pytest.mark.parametrize('kwargs, error', [
        ({'datatype': 4}, UnsupportedDatatypeError),
        ({'ndim': 4}, NiftiDimensionError),
        ({'magic': b'ni1\x00'}, NiftiHeaderError),
        ({'sizeof_hdr': 540}, NiftiHeaderError),
        ({'scl_slope': 2.0}, NiftiScalingError),
        ({'scl_inter': 5.0}, NiftiScalingError),
        ({'vox_offset': 0.0}, NiftiHeaderError),
        ({'vox_offset': 348.0}, NiftiHeaderError),
    ])
    def test_malformed(self, tmp_path, nifti_bytes, kwargs, error):
        fn = tmp_path / 'bad.nii'
        fn.write_bytes(nifti_bytes(np.arange(8), **kwargs))
        with pytest.raises(error):
            read_nifti1(str(fn))

    def test_gzip_rejected(self, tmp_path, nifti_bytes):
        fn = tmp_path / 'v.nii.gz'
        fn.write_bytes(gzip.compress(nifti_bytes(np.arange(8.0))))
        with pytest.raises(CompressedNiftiError):
            read_nifti1(str(fn))

    def test_short_file(self, tmp_path):
        fn = tmp_path / 'v.nii'
        fn.write_bytes(bytes(100))
        with pytest.raises(NiftiHeaderError):
            read_nifti1(str(fn))

    def test_write_round_trip(self, tmp_path, rng):
        volume = rng.standard_normal((3, 4, 5))
        fn = write_nifti1(str(tmp_path / 'out.nii'), volume, (1.5, 1.5, 2.0))
        back, sizes = read_nifti1(fn)
        np.testing.assert_array_equal(back, volume)
        assert sizes == (1.5, 1.5, 2.0)

    def test_list_stacks_subjects(self, tmp_path, nifti_bytes):
        for i in range(3):
            (tmp_path / f's{i}.nii').write_bytes(nifti_bytes(np.full(8, float(i))))
        listing = tmp_path / 'subjects.txt'
        listing.write_text('# volumes\ns0.nii\ns1.nii\n\ns2.nii\n')
        tensor, sizes = read_nifti_list(str(listing))
        assert tensor.shape == (2, 2, 2, 3)
        np.testing.assert_array_equal(tensor[..., 2], 2.0)
        assert sizes == (2.0, 2.0, 2.0)
        tensor, _ = load_response(str(listing))
        assert tensor.shape == (2, 2, 2, 3)

    def test_list_dimension_mismatch(self, tmp_path, nifti_bytes):
        (tmp_path / 'a.nii').write_bytes(nifti_bytes(np.zeros(8)))
        (tmp_path / 'b.nii').write_bytes(nifti_bytes(np.zeros(12), dims=(2, 2, 3)))
        listing = tmp_path / 'subjects.txt'
        listing.write_text('a.nii\nb.nii\n')
        with pytest.raises(NiftiDimensionError):
            read_nifti_list(str(listing))


class TestLoadResponse:
    def test_tensor_file(self, tmp_path):
        fn = write_tensor(str(tmp_path / 'y.tnsr'), np.ones((2, 2, 2, 3)))
        tensor, sizes = load_response(fn)
        assert tensor.shape == (2, 2, 2, 3)
        assert sizes is None

    def test_wrong_order(self, tmp_path):
        fn = write_tensor(str(tmp_path / 'y.tnsr'), np.ones((2, 2, 2)))
        with pytest.raises(InvalidArgumentError):
            load_response(fn)

    def test_missing(self, tmp_path):
        with pytest.raises(IngestionError):
            load_response(str(tmp_path / 'y.tnsr'))
