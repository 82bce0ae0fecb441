#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/cli/__init__.py
