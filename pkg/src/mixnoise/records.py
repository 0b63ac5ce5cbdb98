"""Persisted chain history: iterates, kernel choices, acceptance log, metadata.

On disk a run is three files: chain.csv (every iterate, flat row per
iteration or long (iteration, pixel, dim, value) rows), events.csv
(per-iteration kernel and acceptance flags), and meta.json. Floats are
written with 17 significant digits so a save/load round trip is exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConfigurationError

KERNEL_NAMES = {0: "pmala", 1: "mtm"}
KERNEL_CODES = {v: k for k, v in KERNEL_NAMES.items()}


@dataclass
class ChainRecord:
    """Full iterate history (T+1, N, D) plus the per-iteration event log."""

    thetas: np.ndarray
    kernels: np.ndarray  # (T,) int8; 0 = pmala, 1 = mtm
    accepted: np.ndarray  # (T, N) bool
    burn_in: int
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return self.thetas.shape[0] - 1

    @property
    def n_components(self) -> int:
        return self.thetas.shape[1]

    @property
    def dim(self) -> int:
        return self.thetas.shape[2]

    def samples(self, post_burn: bool = True) -> np.ndarray:
        """Iterates 1..T, optionally dropping the first burn_in of them."""
        start = self.burn_in + 1 if post_burn else 1
        return self.thetas[start:]

    def kernel_fraction(self, kernel: str) -> float:
        code = KERNEL_CODES[kernel]
        return float(np.mean(self.kernels == code))

    def acceptance_rate(self, kernel: str | None = None) -> float:
        """Mean per-component acceptance over iterations of the given kernel."""
        mask = np.ones(self.kernels.shape[0], dtype=bool)
        if kernel is not None:
            mask = self.kernels == KERNEL_CODES[kernel]
        if not np.any(mask):
            return float("nan")
        return float(self.accepted[mask].mean())

    # -- persistence ------------------------------------------------------------

    def save(self, directory, layout: str | None = None) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        layout = layout or self.meta.get("record_layout", "flat")
        if layout not in ("flat", "long"):
            raise ConfigurationError(f"unknown chain layout: {layout}")
        t1, n, d = self.thetas.shape
        if layout == "flat":
            cols = {"iteration": np.arange(t1)}
            flat = self.thetas.reshape(t1, n * d)
            for j in range(n * d):
                cols[f"p{j // d}_d{j % d}"] = flat[:, j]
            frame = pd.DataFrame(cols)
        else:
            it, pix, dim = np.meshgrid(np.arange(t1), np.arange(n), np.arange(d), indexing="ij")
            frame = pd.DataFrame(
                {
                    "iteration": it.ravel(),
                    "pixel": pix.ravel(),
                    "dim": dim.ravel(),
                    "value": self.thetas.ravel(),
                }
            )
        frame.to_csv(directory / "chain.csv", index=False, float_format="%.17g")

        masks = ["".join("1" if a else "0" for a in row) for row in self.accepted]
        events = pd.DataFrame(
            {
                "iteration": np.arange(1, self.kernels.shape[0] + 1),
                "kernel": [KERNEL_NAMES[int(k)] for k in self.kernels],
                "accepted_mask": masks,
                "acceptance_rate": self.accepted.mean(axis=1),
            }
        )
        events.to_csv(directory / "events.csv", index=False, float_format="%.17g")

        meta = dict(self.meta)
        meta.update(
            {
                "iterations": self.iterations,
                "n_components": n,
                "dim": d,
                "burn_in": self.burn_in,
                "seed": self.seed,
                "record_layout": layout,
            }
        )
        with open(directory / "meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")

    @classmethod
    def load(cls, directory) -> "ChainRecord":
        directory = Path(directory)
        with open(directory / "meta.json", encoding="utf-8") as fh:
            meta = json.load(fh)
        n, d = int(meta["n_components"]), int(meta["dim"])
        frame = pd.read_csv(directory / "chain.csv", float_precision="round_trip")
        if meta.get("record_layout", "flat") == "flat":
            cols = [f"p{j // d}_d{j % d}" for j in range(n * d)]
            # pandas hands back a column-major block; force row-major so
            # downstream reductions are layout-independent
            thetas = np.ascontiguousarray(frame[cols].to_numpy(dtype=float)).reshape(-1, n, d)
        else:
            order = np.lexsort((frame["dim"], frame["pixel"], frame["iteration"]))
            thetas = frame["value"].to_numpy(dtype=float)[order].reshape(-1, n, d)
        events = pd.read_csv(directory / "events.csv", dtype={"accepted_mask": str})
        kernels = np.array([KERNEL_CODES[k] for k in events["kernel"]], dtype=np.int8)
        accepted = np.array(
            [[ch == "1" for ch in mask.ljust(n, "0")] for mask in events["accepted_mask"]], dtype=bool
        )
        return cls(
            thetas=thetas,
            kernels=kernels,
            accepted=accepted,
            burn_in=int(meta["burn_in"]),
            seed=int(meta["seed"]),
            meta=meta,
        )
