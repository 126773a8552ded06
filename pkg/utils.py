#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Utility functions for spillnet.

This module provides helpers used across the analysis modules and the
command-line front end.

Key Features:
- The package logger (`logger`), stderr handler, INFO by default.
- JSON encoding/decoding through orjson with deterministic key order.
- SHA-256 digests of input and artifact files for the run manifest.
- `ArtifactWriter`, which writes UTF-8/LF text artifacts into an output
  directory and can remove everything it wrote when a stage fails.
- Float formatting helpers shared by the plain-text formats.
"""

import hashlib
import logging
import os
import sys
from typing import Any, List

import orjson as json_parser

# initialize logging, default to STDERR and INFO level
logger = logging.getLogger("spillnet")
logger.setLevel(logging.INFO)
if not logger.handlers:
    _handler = logging.StreamHandler(sys.stderr)
    _handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logger.addHandler(_handler)


def set_verbose(verbose: bool):
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def parse_json_content(content):
    return json_parser.loads(content)


def dump_json(obj: Any) -> str:
    """Pretty JSON with sorted keys and a trailing newline."""
    data = json_parser.dumps(
        obj,
        option=json_parser.OPT_INDENT_2 | json_parser.OPT_SORT_KEYS | json_parser.OPT_SERIALIZE_NUMPY,
    )
    return data.decode("utf-8") + "\n"


def read_file_content(abs_path: str) -> str:
    """Reads a UTF-8 text file."""
    with open(abs_path, "r", encoding="utf-8") as f:
        return f.read()


def file_digest(path: str) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            sha.update(block)
    return sha.hexdigest()


def format_float(value: float) -> str:
    """Shortest repr that round-trips; used by every full-precision format."""
    return repr(float(value))


def write_text(path: str, text: str):
    basedir = os.path.dirname(path)
    if basedir and not os.path.exists(basedir):
        os.makedirs(basedir)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


class ArtifactWriter:
    """Writes artifacts under one directory and remembers what it wrote."""

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        self.written: List[str] = []

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def write(self, name: str, text: str) -> str:
        path = self.path(name)
        write_text(path, text)
        if path not in self.written:
            self.written.append(path)
        logger.debug("Wrote %s", path)
        return path

    def write_frame(self, name: str, frame, index: bool = True, float_format=None) -> str:
        text = frame.to_csv(index=index, lineterminator="\n", float_format=float_format)
        return self.write(name, text)

    def digests(self) -> dict:
        return {os.path.basename(p): file_digest(p) for p in sorted(self.written)}

    def remove_all(self):
        """Deletes every artifact written so far (partial outputs on failure)."""
        for path in self.written:
            try:
                os.remove(path)
            except FileNotFoundError:
                pass
            except OSError as e:
                logger.warning("Could not remove partial output %s: %s", path, e)
        self.written = []
