"""epsinas: gradient-free architecture scoring by output dispersion between
two constant shared-weight initialisations, plus the tooling around it —
cell-space enumeration, rank-fidelity statistics, ablation sweeps and
score-guided search baselines.
"""

__version__ = "0.1.0"

from .bench import (BenchFormatError, BenchRow, BenchTable, baselines,
                    load_bench_csv, write_bench_csv)
from .data import (BatchSpec, load_batch, load_cifar10_binary, make_batch,
                   make_rng, save_batch)
from .engine import (ShapeError, avg_pool, batchnorm, conv2d, linear, relu)
from .metric import (DegenerateConstantOutput, EpsilonResult, NonFiniteOutput,
                     ScoreRow, ScoreTable, STATUS_DEGENERATE,
                     STATUS_NONFINITE, STATUS_VALID, epsilon_from_outputs,
                     epsilon_from_raw, minmax_normalize, read_scores_csv,
                     score_architecture, score_architecture_random,
                     score_space, write_scores_csv)
from .search import (SearchConfig, SelectionSummary, TrajectoryStep,
                     aging_evolution, final_best_stats, n_sample_selection,
                     random_search, scores_map, write_trajectories_csv)
from .space import (EDGES, Genotype, GenotypeError, Network, NUM_GENOTYPES,
                    OPS, SkeletonConfig, arch_index, build_network,
                    constant_forward, enumerate_space, format_genotype,
                    mutate, param_count, parse_genotype)
from .stats import (JoinedSeries, RankReport, compute_report, join_tables,
                    kendall, spearman, top_fraction_overlap,
                    top_k_in_top_fraction, top_slice_correlations)
from .weights import (InitScheme, WeightPair, init_constant, init_random)

__all__ = [name for name in dir() if not name.startswith("_")]
