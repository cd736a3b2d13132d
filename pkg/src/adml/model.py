"""Learned metric container and its text file format."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ADMLError

MAGIC = "ADML-MODEL v1"


class ModelFormatError(ADMLError):
    pass


@dataclass
class MetricModel:
    """Projection ``W`` (d x q); the induced metric is ``Q = W W^T``."""

    W: np.ndarray
    algo: str = "adml2"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        if W.ndim != 2 or min(W.shape) < 1:
            raise ValueError(f"W must be a non-empty d x q matrix, got shape {W.shape}")
        if not np.all(np.isfinite(W)):
            raise ValueError("W contains NaN or Inf")
        self.W = W

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def q(self) -> int:
        return self.W.shape[1]

    @property
    def Q(self) -> np.ndarray:
        return self.W @ self.W.T

    def project(self, features: np.ndarray) -> np.ndarray:
        """``W^T X`` for a d x N feature matrix (q x N result)."""
        return self.W.T @ features

    def to_text(self) -> str:
        head = f"d={self.d} q={self.q} algo={self.algo}"
        # provenance that does not depend on scheduling (timings are left out)
        for key in ("K", "cfg_hash"):
            if key in self.metadata:
                head += f" {key}={self.metadata[key]}"
        lines = [MAGIC, head]
        lines += [" ".join(format(float(v), ".17g") for v in row) for row in self.W]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def from_text(cls, text: str) -> "MetricModel":
        lines = text.splitlines()
        if len(lines) < 2 or lines[0].strip() != MAGIC:
            raise ModelFormatError(f"not a model file (expected {MAGIC!r} header)")
        try:
            meta = dict(tok.split("=", 1) for tok in lines[1].split())
            d, q, algo = int(meta["d"]), int(meta["q"]), meta["algo"]
            rows = [[float(v) for v in ln.split()] for ln in lines[2:2 + d]]
        except (KeyError, ValueError) as exc:
            raise ModelFormatError(f"bad model file: {exc}") from None
        W = np.array(rows, dtype=np.float64)
        if W.shape != (d, q):
            raise ModelFormatError(f"model body has shape {W.shape}, header says ({d}, {q})")
        extra = {k: v for k, v in meta.items() if k not in ("d", "q", "algo")}
        return cls(W, algo, extra)

    @classmethod
    def load(cls, path) -> "MetricModel":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))
