#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Exception hierarchy for spillnet.

Every error carries the pipeline stage it belongs to. Library code raises
these; `cli.py` and `pipeline.py` translate the stage into an exit code via
`config.EXIT_CODES`.
"""

from config import EXIT_CODES


class SpillnetError(Exception):
    """Base class for all spillnet failures."""

    stage = "fit"

    def __init__(self, message: str, stage: str = None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage

    @property
    def exit_code(self) -> int:
        return EXIT_CODES.get(self.stage, 1)


class ConfigError(SpillnetError):
    stage = "config"

    def __init__(self, message: str, problems=None):
        super().__init__(message)
        self.problems = list(problems or [message])


class IngestError(SpillnetError):
    stage = "ingest"


class AlignError(IngestError):
    stage = "align"


class DiagnosticsError(SpillnetError):
    stage = "stats"


class FitError(SpillnetError):
    stage = "fit"


class GrangerError(SpillnetError):
    stage = "granger"


class FevdError(SpillnetError):
    stage = "fevd"


class ExportError(SpillnetError):
    stage = "export"


class SimulationError(SpillnetError):
    stage = "simulate"
