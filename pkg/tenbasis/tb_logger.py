#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/tb_logger.py

import logging

LOGGER_NAME = 'tenbasis'
FORMAT = "[%(asctime)s][%(name)s][%(process)d][%(thread)d][%(module)s][%(lineno)d][%(levelname)s]: %(message)s"
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

logger = logging.getLogger(LOGGER_NAME)


def close_file_handlers(keep=()):
    """
    Detach and close the file handlers of the tenbasis logger, except those in keep.
    :param keep: handlers to leave attached
    """
    for h in list(logger.handlers):
        if isinstance(h, logging.FileHandler) and h not in keep:
            logger.removeHandler(h)
            h.close()


class GetLogger:
    def __init__(self, path=None, clevel=logging.INFO, Flevel=logging.DEBUG):
        """
        Attach console (and optionally file) handlers to the tenbasis logger.
        :param path: log file name, no file handler if None
        :param clevel: console level
        :param Flevel: file level
        """
        self.logger = logging.getLogger(LOGGER_NAME)
        self.logger.setLevel(logging.DEBUG)
        fmt = logging.Formatter(FORMAT, DATE_FORMAT)
        # set CMD logging
        if not any(getattr(h, '_tenbasis_console', False) for h in self.logger.handlers):
            sh = logging.StreamHandler()
            sh.setFormatter(fmt)
            sh.setLevel(clevel)
            sh._tenbasis_console = True
            self.logger.addHandler(sh)
        # set file logging
        if path is not None:
            known = {getattr(h, 'baseFilename', None) for h in self.logger.handlers}
            fh = logging.FileHandler(path)
            if fh.baseFilename in known:
                fh.close()
            else:
                fh.setFormatter(fmt)
                fh.setLevel(Flevel)
                self.logger.addHandler(fh)

    def debug(self, message):
        self.logger.debug(message)

    def info(self, message):
        self.logger.info(message)

    def warning(self, message):
        self.logger.warning(message)

    def error(self, message):
        self.logger.error(message)

    def cri(self, message):
        self.logger.critical(message)
