#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/__init__.py
# tensor function-on-scalar regression
# __package__ = 'tenbasis'

__all__ = ['pipeline', 'decomposition', 'bayes', 'simbas', 'fileio']

from .pipeline import BayesTensorRegression
from .decomposition import CpModel, cp_als
from .simbas import ContrastSpec, extract_clusters
