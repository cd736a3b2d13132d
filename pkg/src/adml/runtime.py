"""Map/reduce orchestration of subset training.

Map tasks (one per subset) are pure and may run in any order on a thread
pool; the reduce step sorts results by subset id before folding, so the
learned model does not depend on the worker count or completion order.
"""
from __future__ import annotations

import hashlib
import logging
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import aggregate
from .dataset import LabeledDataset, normalize, random_split
from .errors import MissingDense, SubsetDegenerate, WireFormatError
from .model import MetricModel
from .patch import FACTORED, PatchSpec, accumulate_scatter
from .solver import AUTO, SubsetSolution, solve_subset

log = logging.getLogger(__name__)

DDML = "ddml"
ADML1 = "adml1"
ADML2 = "adml2"
ALGOS = (DDML, ADML1, ADML2)


@dataclass(frozen=True)
class JobConfig:
    spec: PatchSpec = PatchSpec()
    q: int = 2
    algo: str = ADML2
    subset_size: int | None = 600
    K: int | None = None
    workers: int = 1
    seed: int = 0
    solver_mode: str = AUTO
    ridge: float | None = None
    collect_dense_R: bool = False
    normalize: bool = False
    dense_cap: int = 2000

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.algo not in ALGOS:
            raise ValueError(f"algo must be one of {ALGOS}")
        if self.algo != DDML and (self.subset_size is None) == (self.K is None):
            raise ValueError("give exactly one of subset_size and K")

    @property
    def needs_dense(self) -> bool:
        return self.collect_dense_R or self.algo == ADML1

    def digest(self) -> str:
        """Hash of everything that affects the model (worker count excluded)."""
        d = asdict(self)
        d.pop("workers")
        return hashlib.sha256(repr(sorted(d.items())).encode()).hexdigest()[:16]


@dataclass
class WorkerResult:
    subset_id: int
    solution: SubsetSolution
    P: np.ndarray
    R: np.ndarray | None = None
    seconds: float = 0.0
    n_samples: int = 0

    @property
    def W(self) -> np.ndarray:
        return self.solution.W

    # Wire format: magic, u32 subset_id, u32 d, u32 q, u8 flags (bit0: dense R),
    # P (d*q f64, row-major), W (likewise), optional R (d*d f64), q f64 eigenvalues.
    MAGIC = b"ADMLWR1"
    _HEAD = struct.Struct("<7sIIIB")

    def to_bytes(self) -> bytes:
        d, q = self.P.shape
        flags = 1 if self.R is not None else 0
        parts = [self._HEAD.pack(self.MAGIC, self.subset_id, d, q, flags),
                 np.ascontiguousarray(self.P, dtype="<f8").tobytes(),
                 np.ascontiguousarray(self.W, dtype="<f8").tobytes()]
        if self.R is not None:
            parts.append(np.ascontiguousarray(self.R, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(self.solution.eigenvalues, dtype="<f8").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "WorkerResult":
        head = cls._HEAD.size
        if len(buf) < head:
            raise WireFormatError("truncated worker result header")
        magic, sid, d, q, flags = cls._HEAD.unpack_from(buf)
        if magic != cls.MAGIC:
            raise WireFormatError(f"bad magic {magic!r}")
        has_R = bool(flags & 1)
        expected = head + 8 * (2 * d * q + (d * d if has_R else 0) + q)
        if len(buf) != expected:
            raise WireFormatError(f"payload is {len(buf)} bytes, expected {expected}")
        arr = np.frombuffer(buf, dtype="<f8", offset=head).astype(np.float64)
        P = arr[:d * q].reshape(d, q)
        W = arr[d * q:2 * d * q].reshape(d, q)
        off = 2 * d * q
        R = None
        if has_R:
            R = arr[off:off + d * d].reshape(d, d)
            off += d * d
        lam = arr[off:off + q]
        return cls(sid, SubsetSolution(W, lam, sid), P, R)


def map_task(subset: LabeledDataset, cfg: JobConfig, subset_id: int = 0) -> WorkerResult:
    """Patch scatter, eigensolve and ``P_k = R_k W_k`` for one subset."""
    t0 = time.perf_counter()
    if cfg.needs_dense and subset.dim > cfg.dense_cap:
        raise MissingDense(f"d={subset.dim} exceeds the dense cap {cfg.dense_cap}")
    scatter = accumulate_scatter(subset, cfg.spec, FACTORED)
    sol = solve_subset(scatter, cfg.q, cfg.solver_mode, cfg.ridge, subset_id)
    P = aggregate.compute_pk(scatter, sol.W)
    R = scatter.dense() if cfg.needs_dense else None
    return WorkerResult(subset_id, sol, P, R, time.perf_counter() - t0, subset.n_samples)


def aggregation_input(results: list[WorkerResult]) -> aggregate.AggregationInput:
    results = sorted(results, key=lambda r: r.subset_id)
    Rs = [r.R for r in results]
    return aggregate.AggregationInput(
        P=[r.P for r in results], W=[r.W for r in results],
        R=None if any(R is None for R in Rs) else Rs,
        subset_ids=[r.subset_id for r in results])


def reduce_fold(results: list[WorkerResult], cfg: JobConfig) -> MetricModel:
    if not results:
        raise SubsetDegenerate("no valid subset results to aggregate")
    inputs = aggregation_input(results).aligned()
    meta = {"K": inputs.K, "subset_ids": inputs.subset_ids, "cfg_hash": cfg.digest(),
            "subset_sizes": [r.n_samples for r in sorted(results, key=lambda r: r.subset_id)]}
    if cfg.algo == ADML1:
        W = aggregate.aggregate_inverse(inputs)
    else:
        W, D, _ = aggregate.aggregate_svd(inputs)
        meta["D"] = D
    return MetricModel(W, cfg.algo, meta)


def run_map(subsets: list[LabeledDataset], cfg: JobConfig):
    """Run map tasks on a bounded pool; returns (results, degenerate subset ids)."""
    def task(k):
        try:
            return map_task(subsets[k - 1], cfg, k)
        except SubsetDegenerate as exc:
            log.warning("subset %d dropped: %s", k, exc)
            return k

    ids = range(1, len(subsets) + 1)
    if cfg.workers == 1:
        outs = [task(k) for k in ids]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outs = list(pool.map(task, ids))
    results = [o for o in outs if isinstance(o, WorkerResult)]
    degenerate = [o for o in outs if not isinstance(o, WorkerResult)]
    return results, degenerate


def train(ds: LabeledDataset, cfg: JobConfig) -> MetricModel:
    """Split, map and reduce; ``algo='ddml'`` solves the whole dataset at once."""
    timings = {}
    t0 = time.perf_counter()
    stats = None
    if cfg.normalize:
        ds, stats = normalize(ds)

    if cfg.algo == DDML:
        scatter = accumulate_scatter(ds, cfg.spec, FACTORED)
        sol = solve_subset(scatter, cfg.q, cfg.solver_mode, cfg.ridge)
        timings["solve"] = time.perf_counter() - t0
        return MetricModel(sol.W, DDML, {"K": 1, "cfg_hash": cfg.digest(), "timings": timings,
                                         "eigenvalues": sol.eigenvalues, "norm_stats": stats})

    subsets, plan = random_split(ds, K=cfg.K, subset_size=cfg.subset_size, seed=cfg.seed)
    t1 = time.perf_counter()
    timings["split"] = t1 - t0
    results, degenerate = run_map(subsets, cfg)
    t2 = time.perf_counter()
    timings["map"] = t2 - t1
    if not results:
        raise SubsetDegenerate(f"all {plan.K} subsets are degenerate")
    model = reduce_fold(results, cfg)
    timings["reduce"] = time.perf_counter() - t2
    model.metadata.update(timings=timings, degenerate=degenerate, norm_stats=stats)
    return model
