#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/exceptions.py
"""
Error types raised by tenbasis.

The CLI maps the three families onto exit codes:
    InvalidArgumentError -> 2, DataError -> 3, NumericalError -> 4
"""


class TenbasisError(Exception):
    """Base class of every tenbasis error"""


class InvalidArgumentError(TenbasisError, ValueError):
    pass


# ------------------------------------------------------#
#                     data errors                       #
# ------------------------------------------------------#
class DataError(TenbasisError):
    pass


class InvalidDataError(DataError, ValueError):
    pass


class TensorFormatError(DataError):
    def __init__(self, message, offset):
        super().__init__(f'{message} (byte offset {offset})')
        self.offset = offset


class IngestionError(DataError):
    def __init__(self, message, row=None, column=None):
        location = []
        if row is not None:
            location.append(f'row {row}')
        if column is not None:
            location.append(f'column {column!r}')
        if location:
            message = f'{message} ({", ".join(location)})'
        super().__init__(message)
        self.row = row
        self.column = column


class NiftiFormatError(DataError):
    pass


class CompressedNiftiError(NiftiFormatError):
    pass


class NiftiHeaderError(NiftiFormatError):
    pass


class UnsupportedDatatypeError(NiftiFormatError):
    pass


class NiftiDimensionError(NiftiFormatError):
    pass


class NiftiScalingError(NiftiFormatError):
    pass


# ------------------------------------------------------#
#                  numerical errors                     #
# ------------------------------------------------------#
class NumericalError(TenbasisError):
    pass


class SingularDesignError(NumericalError):
    def __init__(self, message, covariates=()):
        super().__init__(message)
        self.covariates = list(covariates)


class DegeneratePosteriorError(NumericalError):
    pass


class CrossValidationError(NumericalError):
    def __init__(self, message, fold, rank):
        super().__init__(f'fold {fold}, rank {rank}: {message}')
        self.fold = fold
        self.rank = rank
