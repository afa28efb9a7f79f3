#pragma once

#include "marblix/archive.hpp"
#include "marblix/autoencoder.hpp"
#include "marblix/dataset.hpp"
#include "marblix/fusion.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace marblix {

// ---------------------------------------------------------------------------
// Retrieval criteria and representations under evaluation.
// ---------------------------------------------------------------------------

enum class Criterion { Top1, MV3, MV5, MV10 };

int criterion_depth(Criterion c);  // 1, 3, 5, 10
const char* criterion_name(Criterion c);
Criterion parse_criterion(const std::string& name);

enum class Representation {
  BinaryMonogram,
  RealMonogram,
  ImageUnimodal,
  SequenceUnimodal,
  ImageLatentUnimodal,
  SequenceLatentUnimodal,
};

const char* representation_name(Representation r);

// ---------------------------------------------------------------------------
// Classification metrics from aligned prediction/truth lists. Abstentions
// (empty predictions from a failed majority vote) are scored as errors by
// default; the Exclude policy drops those cases before scoring.
// ---------------------------------------------------------------------------

struct ClassCounts {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  int support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::map<std::string, ClassCounts> per_class;
  int total = 0;        // cases scored
  int abstentions = 0;  // abstentions seen before any exclusion
};

enum class AbstainPolicy { ScoreAsError, Exclude };

MetricsReport compute_metrics(const std::vector<std::optional<std::string>>& predictions,
                              const std::vector<std::string>& truth,
                              AbstainPolicy policy = AbstainPolicy::ScoreAsError);

// ---------------------------------------------------------------------------
// Leave-one-out retrieval: every case queries with itself excluded. Criteria
// the archive is too small for are skipped with a warning.
// ---------------------------------------------------------------------------

struct LooPrediction {
  std::string case_id;
  std::string truth;
  // present only for criteria that were evaluable; empty optional = abstain
  std::map<Criterion, std::optional<std::string>> predicted;
};

std::vector<LooPrediction> leave_one_out(const Archive& archive, Metric metric,
                                         const std::vector<Criterion>& criteria);

// The unimodal baseline: the same protocol over raw (min-max scaled)
// embedding columns under Euclidean distance.
std::vector<LooPrediction> leave_one_out_vectors(const MatrixXr& columns,
                                                 const std::vector<std::string>& ids,
                                                 const std::vector<std::string>& labels,
                                                 const std::vector<Criterion>& criteria);

MetricsReport metrics_for_criterion(const std::vector<LooPrediction>& predictions, Criterion c,
                                    AbstainPolicy policy = AbstainPolicy::ScoreAsError);

// ---------------------------------------------------------------------------
// Cross-validation of the full pipeline. Per fold: scaling, autoencoders and
// the fusion network are fit on the training split only; the test split's
// monograms form an archive evaluated leave-one-out.
// ---------------------------------------------------------------------------

struct PipelineConfig {
  AeHyper ae_image = kImageToSeqDefaults;
  AeHyper ae_sequence = kSeqToImageDefaults;
  FusionHyper fusion;
  std::vector<Criterion> criteria = {Criterion::Top1, Criterion::MV3, Criterion::MV5,
                                     Criterion::MV10};
  std::uint64_t seed = 17;
  bool include_latent_baselines = false;
};

double sample_mean(const std::vector<double>& values);
double sample_std(const std::vector<double>& values);  // n-1 denominator; 0 for n < 2

struct FoldSummary {
  std::vector<int> folds;
  std::vector<MetricsReport> reports;  // aligned with folds
  double mean_accuracy = 0.0, std_accuracy = 0.0;
  double mean_precision = 0.0, std_precision = 0.0;
  double mean_recall = 0.0, std_recall = 0.0;
  double mean_f1 = 0.0, std_f1 = 0.0;
};

FoldSummary summarize_folds(const std::vector<int>& folds,
                            const std::vector<MetricsReport>& reports);

struct FoldRun {
  int fold = 0;
  TrainReport ae_image_report;
  TrainReport ae_sequence_report;
  TrainReport fusion_report;
  std::map<Representation, std::vector<LooPrediction>> predictions;
  std::vector<ArchiveEntry> test_entries;  // test-split monograms
};

struct CrossValidationResult {
  // (representation, criterion) -> per-fold metrics + mean/std
  std::map<std::pair<Representation, Criterion>, FoldSummary> summaries;
  std::map<std::pair<Representation, Criterion>, FoldSummary> summaries_excluding_abstentions;
  std::vector<FoldRun> folds;
  std::vector<int> skipped_folds;
};

CrossValidationResult cross_validate(const Dataset& dataset, const FoldAssignment& folds,
                                     const PipelineConfig& config);

// ---------------------------------------------------------------------------
// XOR dissimilarity between monogram sets.
// ---------------------------------------------------------------------------

struct DissimilarityMatrix {
  std::vector<std::string> row_ids, row_labels;
  std::vector<std::string> col_ids, col_labels;
  Eigen::MatrixXi distances;  // popcount(a XOR b)
};

DissimilarityMatrix xor_dissimilarity(const std::vector<ArchiveEntry>& a,
                                      const std::vector<ArchiveEntry>& b);

// Per-bit transition grid between two codes: +1 where the bit turns 0 -> 1,
// -1 where it turns 1 -> 0, 0 where it is unchanged.
std::array<int, kCodeBits> xor_bit_flips(std::uint64_t from, std::uint64_t to);

// ---------------------------------------------------------------------------
// PCA by eigendecomposition of the covariance; columns are cases. Components
// come out orthonormal, ordered by descending variance, with a deterministic
// sign convention. Rank deficiency yields fewer components with a warning.
// ---------------------------------------------------------------------------

struct PcaResult {
  MatrixXr components;         // d x k
  MatrixXr projected;          // k x n
  VectorXr explained_variance;  // k, descending
};

PcaResult pca_project(const MatrixXr& columns, Index n_components = 64);

// ---------------------------------------------------------------------------
// Report tables (comma-separated).
// ---------------------------------------------------------------------------

struct MetricsRow {
  Representation representation;
  Criterion criterion;
  int fold;
  MetricsReport metrics;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
void write_summary_csv(const std::string& path,
                       const std::map<std::pair<Representation, Criterion>, FoldSummary>& summaries);
void write_loss_curves_csv(const std::string& path, const std::vector<FoldRun>& folds);
void write_reconstruction_csv(const std::string& path, const ReconstructionReport& report);
void write_reconstruction_summary_csv(const std::string& path, const ReconstructionReport& report);
void write_dissimilarity_csv(const std::string& path, const DissimilarityMatrix& matrix);
void write_xor_bit_grids_csv(const std::string& path, const std::vector<ArchiveEntry>& a,
                             const std::vector<ArchiveEntry>& b);

std::vector<MetricsRow> metrics_rows(const CrossValidationResult& result, bool excluding_abstentions);

}  // namespace marblix
