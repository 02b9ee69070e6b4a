"""Loaders and validators for the simulator's exported file formats.

Violations are reported with the offending row number so bad exports can
be located quickly.
"""
from __future__ import annotations

import csv
import json
import re

import numpy as np


class SchemaError(ValueError):
    """Input file does not conform to the expected export schema."""


SUMMARY_REQUIRED = {
    "n0",
    "policy_label",
    "mse",
    "se_mse",
    "mean_rounds",
    "se_mean_rounds",
}

TRACE_REQUIRED = [
    "trial_id",
    "round",
    "d",
    "epsilon",
    "info_gained_bits",
    "info_available_bits",
    "expected_loop_photons",
]

_BELIEF_COL = re.compile(r"^p_(\d+)_(\d+)$")


def load_summary(path) -> list[dict]:
    """Read a summary/sweep JSON export; returns the per-cell rows."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict) or "cells" not in payload:
        raise SchemaError(f"{path}: missing top-level 'cells' array")
    rows = payload["cells"]
    for i, row in enumerate(rows):
        missing = SUMMARY_REQUIRED - set(row)
        if missing:
            raise SchemaError(f"{path}: row {i}: missing keys {sorted(missing)}")
    return rows


def load_trace(path) -> list[dict]:
    """Read a per-round trace CSV; returns typed rows."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRACE_REQUIRED:
            raise SchemaError(
                f"{path}: row 0: expected header {TRACE_REQUIRED}, got {reader.fieldnames}"
            )
        rows = []
        for i, raw in enumerate(reader, start=1):
            try:
                rows.append(
                    {
                        "trial_id": int(raw["trial_id"]),
                        "round": int(raw["round"]),
                        "d": int(raw["d"]),
                        "epsilon": float(raw["epsilon"]),
                        "info_gained_bits": float(raw["info_gained_bits"]),
                        "info_available_bits": float(raw["info_available_bits"]),
                        "expected_loop_photons": float(raw["expected_loop_photons"]),
                    }
                )
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{path}: row {i}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def load_belief(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a belief-history CSV; returns (rounds, joints).

    joints has shape (n_rounds, dim, dim) where entry [r, m, n] is the
    probability of m loop photons and n initial photons after round r.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if not header or header[0] != "round":
            raise SchemaError(f"{path}: row 0: first column must be 'round'")
        dim = 0
        for j, name in enumerate(header[1:], start=1):
            match = _BELIEF_COL.match(name)
            if not match:
                raise SchemaError(f"{path}: row 0: bad column name {name!r} (col {j})")
            dim = max(dim, int(match.group(1)) + 1, int(match.group(2)) + 1)
        if len(header) - 1 != dim * dim:
            raise SchemaError(
                f"{path}: row 0: expected {dim * dim} probability columns, got {len(header) - 1}"
            )
        rounds, joints = [], []
        for i, raw in enumerate(reader, start=1):
            if len(raw) != len(header):
                raise SchemaError(f"{path}: row {i}: expected {len(header)} fields, got {len(raw)}")
            try:
                rounds.append(int(raw[0]))
                joints.append(np.array([float(x) for x in raw[1:]]).reshape(dim, dim))
            except ValueError as exc:
                raise SchemaError(f"{path}: row {i}: {exc}") from exc
    if not rounds:
        raise SchemaError(f"{path}: no data rows")
    return np.array(rounds), np.array(joints)
