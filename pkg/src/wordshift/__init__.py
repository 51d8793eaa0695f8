"""Detect statistically significant shifts in word usage across a time-sliced corpus.

The pipeline: load snapshots and build the common vocabulary, train one
skipgram embedding space per snapshot, warp the spaces onto the first
snapshot's coordinates, construct per-word time series (frequency,
syntactic, distributional), and flag words whose series show a significant
mean shift under a permutation bootstrap.
"""

from .alignment import (AlignmentCollection, AlignmentMap, NeighborSet,
                        RankDeficiencyError, align_all_to_base, k_nearest,
                        learn_alignment)
from .changepoint import (ChangePointResult, DetectorConfig, NormalizedEnsemble,
                          bootstrap_pvalues, detect, detect_ensemble, mean_shift,
                          normalize_ensemble, sort_results, write_report_csv)
from .corpus import (CorpusFormatError, CorpusSnapshot, EmptyVocabularyError,
                     MissingWordError, POSDistribution, SnapshotLabel,
                     TaggedCorpusSnapshot, TemporalCorpus, Vocabulary,
                     build_common_vocabulary, load_snapshot, pos_distribution)
from .embedding import (EmbeddingSpace, HuffmanTree, TrainingConfig,
                        TrainingDivergedError, build_huffman_tree,
                        check_convergence, hs_log_prob, load_embeddings,
                        save_embeddings, sgd_step, subsample_keep_probability,
                        train_corpus, train_snapshot)
from .series import (DISTRIBUTIONAL, FREQUENCY, METHODS, SYNTACTIC,
                     SeriesEnsemble, WordTimeSeries, distributional_ensemble,
                     distributional_series, frequency_ensemble, frequency_series,
                     jsd, syntactic_ensemble, syntactic_series, write_series_csv)
from .synthbench import (BenchResult, PerturbationPlan, duplicate_corpus, mrr,
                         perturb, rank_words_by_pvalue, run_bench,
                         sample_word_pairs, write_bench_csv)
from .textgen import GeneratorConfig, generate_corpus

__version__ = "0.1.0"
