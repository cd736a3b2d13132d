"""Discriminative distance metric learning with divide-and-conquer aggregation."""
from .dataset import (LabeledDataset, NormStats, SplitPlan, gen_coiled_surfaces, load_csv,
                      normalize, random_split, train_test_split, write_csv)
from .patch import Patch, PatchSpec, ScatterRep, accumulate_scatter, build_local_penalty, find_patch
from .solver import SubsetSolution, eigen_smallest, solve_subset
from .aggregate import (AggregationInput, BoundReport, aggregate_inverse, aggregate_svd,
                        bound_report, compute_pk)
from .model import MetricModel
from .runtime import JobConfig, WorkerResult, map_task, reduce_fold, train
from .evaluate import (Histogram, TagStats, annotate, f1_scores, knn_accuracy, knn_classify, mdist,
                       pair_histogram, subspace_distance, tag_stats)

__version__ = "0.1.0"
