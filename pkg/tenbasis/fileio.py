#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/fileio.py
"""
Persistence.

Tensor file (.tnsr), little-endian:
    'TNSR' | u8 version = 1 | u8 order K | 6 zero bytes | K x u64 dims | prod(dims) x f64 values
values are first-index-fastest. CP models and chains are sets of tensor files plus a json sidecar.
"""
import io
import json
import os
import struct
from typing import Mapping, Optional, Sequence, Union

import nibabel as nib
import numpy as np
import pandas as pd

from .bayes import McmcChain
from .decomposition import CpModel
from .exceptions import (CompressedNiftiError, IngestionError, InvalidArgumentError, NiftiDimensionError,
                         NiftiFormatError, NiftiHeaderError, NiftiScalingError, TensorFormatError,
                         UnsupportedDatatypeError)
from .tb_logger import logger

MAGIC = b'TNSR'
VERSION = 1
HEADER = struct.Struct('<4sBB6s')
FLOAT_FORMAT = '%.17g'

NIFTI1_HEADER_SIZE = 348
NIFTI1_DATATYPES = {16: 'float32', 64: 'float64'}
GZIP_MAGIC = b'\x1f\x8b'


# ------------------------------------------------------#
#                      tensor files                     #
# ------------------------------------------------------#
def write_tensor(path: str, t) -> str:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim < 1 or t.ndim > 255:
        raise InvalidArgumentError(f'cannot store a tensor of order {t.ndim}')
    with open(path, 'wb') as f:
        f.write(HEADER.pack(MAGIC, VERSION, t.ndim, bytes(6)))
        f.write(np.asarray(t.shape, dtype='<u8').tobytes())
        f.write(t.ravel(order='F').astype('<f8').tobytes())
    return path


def _need(data: bytes, end: int, what: str):
    if len(data) < end:
        raise TensorFormatError(f'truncated {what}', len(data))


def read_tensor(path: str) -> np.ndarray:
    """
    :param path: .tnsr file
    :return: float64 tensor, bit-identical to what was written
    """
    with open(path, 'rb') as f:
        data = f.read()
    _need(data, 4, 'magic')
    if data[:4] != MAGIC:
        raise TensorFormatError(f'bad magic {data[:4]!r} in {path}', 0)
    _need(data, 5, 'header')
    if data[4] != VERSION:
        raise TensorFormatError(f'unsupported version {data[4]} in {path}', 4)
    _need(data, 6, 'header')
    order = data[5]
    if order == 0:
        raise TensorFormatError(f'order 0 in {path}', 5)
    _need(data, HEADER.size, 'header')
    reserved = data[6:HEADER.size]
    if any(reserved):
        raise TensorFormatError(f'nonzero reserved bytes in {path}', 6 + next(i for i, b in enumerate(reserved) if b))

    start = HEADER.size
    if len(data) < start + 8 * order:
        raise TensorFormatError(f'truncated dims in {path}', start + 8 * ((len(data) - start) // 8))
    dims = np.frombuffer(data, dtype='<u8', count=order, offset=start)
    for k, d in enumerate(dims):
        if d == 0:
            raise TensorFormatError(f'zero dimension in {path}', start + 8 * k)
    start += 8 * order

    count = int(np.prod(dims.astype(object)))
    available = len(data) - start
    if available < 8 * count:
        raise TensorFormatError(f'truncated payload in {path}: {available // 8} of {count} values',
                                start + 8 * (available // 8))
    if available > 8 * count:
        raise TensorFormatError(f'{available - 8 * count} trailing bytes in {path}', start + 8 * count)
    values = np.frombuffer(data, dtype='<f8', count=count, offset=start).astype(np.float64)
    return np.reshape(values, tuple(int(d) for d in dims), order='F')


# ------------------------------------------------------#
#                  CP models and chains                 #
# ------------------------------------------------------#
def write_cp_model(model: CpModel, directory: str, prefix: str = 'cp') -> str:
    os.makedirs(directory, exist_ok=True)
    write_tensor(os.path.join(directory, f'{prefix}_weights.tnsr'), model.weights)
    for k, factor in enumerate(model.factors):
        write_tensor(os.path.join(directory, f'{prefix}_factor{k + 1}.tnsr'), factor)
    meta = {'rank': model.rank, 'dims': list(model.dims), 'fit': model.fit, 'iterations': model.iterations,
            'converged': model.converged, 'fit_trace': model.fit_trace}
    fn = os.path.join(directory, f'{prefix}.json')
    with open(fn, 'w') as f:
        json.dump(meta, f, indent=4)
    return fn


def read_cp_model(directory: str, prefix: str = 'cp') -> CpModel:
    with open(os.path.join(directory, f'{prefix}.json')) as f:
        meta = json.load(f)
    weights = read_tensor(os.path.join(directory, f'{prefix}_weights.tnsr'))
    factors = [read_tensor(os.path.join(directory, f'{prefix}_factor{k + 1}.tnsr')) for k in range(len(meta['dims']))]
    return CpModel(weights, factors, fit=meta['fit'], iterations=meta['iterations'], converged=meta['converged'],
                   fit_trace=meta['fit_trace'])


def write_chain(chain: McmcChain, directory: str) -> str:
    """gamma* draws as an order-3 tensor (M' x p x R), Sigma draws as (M' x R x R), json metadata"""
    os.makedirs(directory, exist_ok=True)
    write_tensor(os.path.join(directory, 'chain_gamma_star.tnsr'), chain.gamma_star)
    write_tensor(os.path.join(directory, 'chain_sigma.tnsr'), chain.sigma)
    meta = {'n_total': chain.n_total, 'burn_in': chain.burn_in, 'thin': chain.thin, 'seed': chain.seed,
            'n_samples': chain.n_samples, 'covariate_names': chain.covariate_names}
    fn = os.path.join(directory, 'chain.json')
    with open(fn, 'w') as f:
        json.dump(meta, f, indent=4)
    return fn


def read_chain(directory: str) -> McmcChain:
    with open(os.path.join(directory, 'chain.json')) as f:
        meta = json.load(f)
    gamma_star = read_tensor(os.path.join(directory, 'chain_gamma_star.tnsr'))
    sigma = read_tensor(os.path.join(directory, 'chain_sigma.tnsr'))
    return McmcChain(np.reshape(gamma_star, (meta['n_samples'],) + gamma_star.shape[1:]),
                     np.reshape(sigma, (meta['n_samples'],) + sigma.shape[1:]),
                     meta['n_total'], meta['burn_in'], meta['thin'], meta['seed'], meta['covariate_names'])


# ------------------------------------------------------#
#                       covariates                      #
# ------------------------------------------------------#
def read_covariates(path: str, intercept: bool = True,
                    subject_order: Optional[Union[Sequence[str], Mapping[str, int]]] = None,
                    n_subjects: Optional[int] = None):
    """
    Read a covariate table: header row, first column subject_id, numeric remaining columns.
    :param path: csv file
    :param intercept: prepend a column of ones named 'intercept'
    :param subject_order: tensor subject order, a list of ids or a mapping id -> tensor position
    :param n_subjects: size of the tensor subject mode
    :return: (Z, covariate names, subject ids)
    """
    if not os.path.isfile(path):
        raise IngestionError(f'covariate file not found: {path}')
    df = pd.read_csv(path, dtype=str, skipinitialspace=True)
    if df.shape[1] < 1:
        raise IngestionError(f'{path} has no columns')
    id_col = df.columns[0]
    ids = df[id_col].astype(str).str.strip()
    dup = ids.duplicated()
    if dup.any():
        row = int(np.flatnonzero(dup.values)[0])
        raise IngestionError(f'duplicate subject id {ids.iloc[row]!r} in {path}', row=row + 1, column=id_col)

    values = pd.DataFrame(index=df.index)
    for col in df.columns[1:]:
        numeric = pd.to_numeric(df[col].str.strip(), errors='coerce')
        bad = numeric.isna()
        if bad.any():
            row = int(np.flatnonzero(bad.values)[0])
            raise IngestionError(f'non-numeric value {df[col].iloc[row]!r} in {path}', row=row + 1, column=col)
        values[col] = numeric.astype(np.float64)
    values.index = ids.values

    if subject_order is not None:
        if isinstance(subject_order, Mapping):
            subject_order = [sid for sid, _ in sorted(subject_order.items(), key=lambda kv: kv[1])]
        subject_order = [str(s) for s in subject_order]
        missing = [s for s in subject_order if s not in values.index]
        if missing:
            raise IngestionError(f'subjects {missing[:5]} missing from {path}', column=id_col)
        if len(subject_order) != len(values.index):
            raise IngestionError(f'{path} lists {len(values.index)} subjects, the tensor has {len(subject_order)}')
        values = values.loc[subject_order]
    if n_subjects is not None and len(values.index) != n_subjects:
        raise IngestionError(f'{path} has {len(values.index)} subject rows, the tensor subject mode has {n_subjects}')

    names = list(values.columns)
    Z = values.to_numpy(dtype=np.float64)
    if intercept and 'intercept' not in [n.lower() for n in names]:
        Z = np.column_stack([np.ones(Z.shape[0]), Z])
        names = ['intercept'] + names
    return Z, names, list(values.index)


def write_covariates(path: str, Z, covariate_names: Sequence[str], subject_ids: Sequence[str]) -> str:
    df = pd.DataFrame(np.asarray(Z, dtype=np.float64), columns=list(covariate_names))
    df.insert(0, 'subject_id', list(subject_ids))
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


# ------------------------------------------------------#
#                         NIfTI-1                       #
# ------------------------------------------------------#
def read_nifti1(path: str):
    """
    Read an uncompressed single-file NIfTI-1 volume (float32 / float64, 3 dims, no scaling).
    :param path: .nii file
    :return: (float64 tensor of order 3, voxel sizes)
    """
    with open(path, 'rb') as f:
        raw = f.read()
    if raw[:2] == GZIP_MAGIC:
        raise CompressedNiftiError(f'compressed NIfTI unsupported: {path}')
    if len(raw) < NIFTI1_HEADER_SIZE:
        raise NiftiHeaderError(f'{path} is shorter than a NIfTI-1 header')
    if NIFTI1_HEADER_SIZE not in struct.unpack('<i', raw[:4]) + struct.unpack('>i', raw[:4]):
        raise NiftiHeaderError(f'sizeof_hdr is not 348 in {path}')
    hdr = nib.Nifti1Header.from_fileobj(io.BytesIO(raw), check=False)
    magic = hdr['magic'].item()
    if magic != b'n+1':
        raise NiftiHeaderError(f'bad magic {magic!r} in {path}, expected single-file n+1')
    datatype = int(hdr['datatype'])
    if datatype not in NIFTI1_DATATYPES:
        raise UnsupportedDatatypeError(f'unsupported datatype {datatype} in {path}, '
                                       f'expected one of {sorted(NIFTI1_DATATYPES)}')
    dim = hdr['dim']
    if int(dim[0]) != 3:
        raise NiftiDimensionError(f'{path} has {int(dim[0])} dimensions, expected a 3-D volume')
    slope, inter = float(hdr['scl_slope']), float(hdr['scl_inter'])
    if not (np.isnan(slope) or slope in (0.0, 1.0)) or (slope == 1.0 and not (np.isnan(inter) or inter == 0.0)):
        raise NiftiScalingError(f'intensity scaling (scl_slope={slope}, scl_inter={inter}) unsupported in {path}')

    dims = tuple(int(d) for d in dim[1:4])
    dtype = hdr.get_data_dtype()
    offset = int(hdr['vox_offset'])
    if offset < 352:
        raise NiftiHeaderError(f'{path} has vox_offset {offset}, single-file images keep voxels at 352 or later')
    count = int(np.prod(dims))
    if len(raw) < offset + count * dtype.itemsize:
        raise NiftiFormatError(f'{path} is truncated: {count} voxels expected from offset {offset}')
    values = np.frombuffer(raw, dtype=dtype, count=count, offset=offset).astype(np.float64)
    voxel_sizes = tuple(float(v) for v in hdr['pixdim'][1:4])
    return np.reshape(values, dims, order='F'), voxel_sizes


def read_nifti_list(list_path: str):
    """
    Stack per-subject 3-D volumes listed one per line into a (p1, p2, p3, N) tensor.
    """
    base = os.path.dirname(os.path.abspath(list_path))
    with open(list_path) as f:
        paths = [line.strip() for line in f if line.strip() and not line.startswith('#')]
    if not paths:
        raise IngestionError(f'{list_path} lists no volumes')
    volumes, voxel_sizes = [], None
    for p in paths:
        volume, sizes = read_nifti1(p if os.path.isabs(p) else os.path.join(base, p))
        if volumes and volume.shape != volumes[0].shape:
            raise NiftiDimensionError(f'{p} has dims {volume.shape}, expected {volumes[0].shape}')
        voxel_sizes = voxel_sizes or sizes
        volumes.append(volume)
    logger.info(f'loaded {len(volumes)} volumes of dims {volumes[0].shape} from {list_path}')
    return np.stack(volumes, axis=3), voxel_sizes


def write_nifti1(path: str, volume, voxel_sizes: Optional[Sequence[float]] = None) -> str:
    sizes = list(voxel_sizes) if voxel_sizes is not None else [1.0, 1.0, 1.0]
    img = nib.Nifti1Image(np.asarray(volume, dtype=np.float64), affine=np.diag(sizes + [1.0]))
    img.to_filename(path)
    return path


def load_response(path: str):
    """
    :param path: a .tnsr 4-way tensor or a text list of .nii volumes
    :return: (tensor (p1, p2, p3, N), voxel sizes or None)
    """
    if not os.path.isfile(path):
        raise IngestionError(f'response file not found: {path}')
    if path.endswith('.tnsr'):
        tensor, voxel_sizes = read_tensor(path), None
    else:
        tensor, voxel_sizes = read_nifti_list(path)
    if tensor.ndim != 4:
        raise InvalidArgumentError(f'{path} holds an order-{tensor.ndim} tensor, expected (p1, p2, p3, N)')
    return tensor, voxel_sizes


def write_table(df: pd.DataFrame, path: str) -> str:
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f'wrote {path}')
    return path
