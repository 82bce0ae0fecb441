#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: test/conftest.py
import struct

import numpy as np
import pytest

from tenbasis.decomposition import CpModel


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_cp_model():
    """factory: random CP model with unit-norm columns and weights log-uniform in [1, 10]"""

    def _make(dims, rank, seed=0):
        gen = np.random.default_rng(seed)
        factors = []
        for dim in dims:
            a = gen.standard_normal((dim, rank))
            factors.append(a / np.linalg.norm(a, axis=0))
        weights = 10.0 ** gen.uniform(0.0, 1.0, rank)
        return CpModel(weights, factors)

    return _make


@pytest.fixture
def nifti_bytes():
    """
    factory: single-file NIfTI-1 image assembled byte by byte
    (348-byte header, 4 extension bytes, data at offset 352)
    """

    def _build(values, dims=(2, 2, 2), datatype=16, ndim=3, magic=b'n+1\x00', sizeof_hdr=348,
               scl_slope=1.0, scl_inter=0.0, pixdim=(2.0, 2.0, 2.0), vox_offset=352.0):
        codes = {16: ('<f4', 32), 64: ('<f8', 64), 4: ('<i2', 16)}
        dtype, bitpix = codes[datatype]
        hdr = bytearray(348)
        struct.pack_into('<i', hdr, 0, sizeof_hdr)
        dim = [ndim] + list(dims) + [1] * (7 - len(dims))
        struct.pack_into('<8h', hdr, 40, *dim)
        struct.pack_into('<h', hdr, 70, datatype)
        struct.pack_into('<h', hdr, 72, bitpix)
        struct.pack_into('<8f', hdr, 76, 1.0, *pixdim, 1.0, 1.0, 1.0, 1.0)
        struct.pack_into('<f', hdr, 108, vox_offset)
        struct.pack_into('<f', hdr, 112, scl_slope)
        struct.pack_into('<f', hdr, 116, scl_inter)
        hdr[344:348] = magic
        data = np.asarray(values).astype(dtype).ravel(order='F').tobytes()
        return bytes(hdr) + bytes(4) + data

    return _build
