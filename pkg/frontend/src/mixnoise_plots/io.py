"""Readers for the sampler's persisted file formats.

Only the documented interchange files are touched (chain.csv + meta.json,
events.csv, stats.json, scene/target JSON, blend.json); there is no
in-process dependency on the sampling package.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd


class PlotInputError(ValueError):
    """Missing, empty, or malformed input artifact."""


def resolve(paths: list[str | Path], name: str) -> Path:
    """Find ``name`` among the given files and directories."""
    for p in paths:
        p = Path(p)
        if p.is_dir() and (p / name).exists():
            return p / name
        if p.name == name and p.exists():
            return p
    raise PlotInputError(f"could not find {name} among inputs {[str(p) for p in paths]}")


def read_json(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise PlotInputError(f"{path}: invalid JSON at line {exc.lineno}") from exc


def read_csv(path: Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except pd.errors.ParserError as exc:
        raise PlotInputError(f"{path}: {exc}") from exc
    except pd.errors.EmptyDataError as exc:
        raise PlotInputError(f"{path}: file is empty") from exc
    bad = frame.isna().any(axis=1)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0]) + 2  # header + 1-based
        raise PlotInputError(f"{path}: unparseable value at row {row}")
    return frame


def load_chain(paths: list[str | Path]) -> tuple[np.ndarray, dict]:
    """Post-burn-in samples (T, N, D) from chain.csv + meta.json."""
    meta = read_json(resolve(paths, "meta.json"))
    frame = read_csv(resolve(paths, "chain.csv"))
    n, d = int(meta["n_components"]), int(meta["dim"])
    layout = meta.get("record_layout", "flat")
    if layout == "flat":
        cols = [f"p{j // d}_d{j % d}" for j in range(n * d)]
        missing = [c for c in cols if c not in frame.columns]
        if missing:
            raise PlotInputError(f"chain.csv lacks expected columns, e.g. {missing[0]}")
        thetas = frame[cols].to_numpy(dtype=float).reshape(-1, n, d)
    else:
        order = np.lexsort((frame["dim"], frame["pixel"], frame["iteration"]))
        thetas = frame["value"].to_numpy(dtype=float)[order].reshape(-1, n, d)
    burn = int(meta.get("burn_in", 0))
    samples = thetas[burn + 1 :]
    if samples.size == 0:
        raise PlotInputError("chain holds no post-burn-in samples")
    return samples, meta
