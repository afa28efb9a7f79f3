#include "marblix/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>

namespace marblix {

int criterion_depth(Criterion c) {
  switch (c) {
    case Criterion::Top1: return 1;
    case Criterion::MV3: return 3;
    case Criterion::MV5: return 5;
    case Criterion::MV10: return 10;
  }
  throw std::invalid_argument("unknown criterion");
}

const char* criterion_name(Criterion c) {
  switch (c) {
    case Criterion::Top1: return "top-1";
    case Criterion::MV3: return "mv@3";
    case Criterion::MV5: return "mv@5";
    case Criterion::MV10: return "mv@10";
  }
  return "?";
}

Criterion parse_criterion(const std::string& name) {
  if (name == "top-1") return Criterion::Top1;
  if (name == "mv@3") return Criterion::MV3;
  if (name == "mv@5") return Criterion::MV5;
  if (name == "mv@10") return Criterion::MV10;
  throw ConfigError("unknown criterion '" + name + "' (expected top-1, mv@3, mv@5 or mv@10)");
}

const char* representation_name(Representation r) {
  switch (r) {
    case Representation::BinaryMonogram: return "binary-monogram";
    case Representation::RealMonogram: return "real-monogram";
    case Representation::ImageUnimodal: return "image-unimodal";
    case Representation::SequenceUnimodal: return "sequence-unimodal";
    case Representation::ImageLatentUnimodal: return "image-latent-unimodal";
    case Representation::SequenceLatentUnimodal: return "sequence-latent-unimodal";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Metrics.
// ---------------------------------------------------------------------------

MetricsReport compute_metrics(const std::vector<std::optional<std::string>>& predictions,
                              const std::vector<std::string>& truth, AbstainPolicy policy) {
  if (predictions.size() != truth.size()) {
    throw DimensionError("compute_metrics: prediction/truth lengths differ");
  }
  if (predictions.empty()) throw std::invalid_argument("compute_metrics: empty lists");

  MetricsReport report;
  for (const auto& p : predictions) report.abstentions += p.has_value() ? 0 : 1;

  std::vector<std::size_t> scored;
  scored.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (policy == AbstainPolicy::Exclude && !predictions[i].has_value()) continue;
    scored.push_back(i);
  }
  if (scored.empty()) {
    log_warn("compute_metrics: every case abstained; excluded-variant metrics are zero");
    return report;
  }

  int correct = 0;
  for (std::size_t i : scored) {
    const std::string& t = truth[i];
    auto& counts = report.per_class[t];
    counts.support += 1;
    if (predictions[i].has_value() && *predictions[i] == t) {
      counts.tp += 1;
      ++correct;
    } else {
      counts.fn += 1;
      if (predictions[i].has_value()) report.per_class[*predictions[i]].fp += 1;
    }
  }
  report.total = static_cast<int>(scored.size());
  report.accuracy = static_cast<double>(correct) / static_cast<double>(report.total);

  // Macro averages over classes present in the scored truth.
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  int n_classes = 0;
  for (const auto& [label, c] : report.per_class) {
    if (c.support == 0) continue;  // label only ever predicted, never true
    const double precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
    const double recall = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
    const double f1 = (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall)
                                               : 0.0;
    p_sum += precision;
    r_sum += recall;
    f_sum += f1;
    ++n_classes;
  }
  report.macro_precision = p_sum / n_classes;
  report.macro_recall = r_sum / n_classes;
  report.macro_f1 = f_sum / n_classes;
  return report;
}

// ---------------------------------------------------------------------------
// Leave-one-out.
// ---------------------------------------------------------------------------

namespace {

// Criteria that fit in an archive of n entries when each query excludes
// itself; skipped ones are reported once.
std::vector<Criterion> evaluable_criteria(const std::vector<Criterion>& criteria, std::size_t n,
                                          const char* what) {
  std::vector<Criterion> out;
  for (Criterion c : criteria) {
    if (n >= static_cast<std::size_t>(criterion_depth(c)) + 1) {
      out.push_back(c);
    } else {
      log_warn(std::string("leave_one_out: skipping ") + criterion_name(c) + " (" + what +
               " has only " + std::to_string(n) + " entries)");
    }
  }
  return out;
}

void fill_predictions(LooPrediction& p, const std::vector<RetrievalHit>& hits,
                      const std::vector<Criterion>& criteria) {
  for (Criterion c : criteria) {
    if (c == Criterion::Top1) {
      p.predicted[c] = hits.front().label;
    } else {
      p.predicted[c] = majority_vote(hits, criterion_depth(c)).predicted;
    }
  }
}

}  // namespace

std::vector<LooPrediction> leave_one_out(const Archive& archive, Metric metric,
                                         const std::vector<Criterion>& criteria) {
  const std::vector<Criterion> usable = evaluable_criteria(criteria, archive.size(), "archive");
  std::size_t max_depth = 0;
  for (Criterion c : usable) {
    max_depth = std::max(max_depth, static_cast<std::size_t>(criterion_depth(c)));
  }

  std::vector<LooPrediction> out;
  out.reserve(archive.size());
  for (const auto& entry : archive.entries()) {
    LooPrediction p;
    p.case_id = entry.case_id;
    p.truth = entry.label;
    if (!usable.empty()) {
      Monogram query{entry.bits, entry.real_code};
      std::vector<RetrievalHit> hits =
          search_topk(archive, query, max_depth, metric, entry.case_id);
      fill_predictions(p, hits, usable);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<LooPrediction> leave_one_out_vectors(const MatrixXr& columns,
                                                 const std::vector<std::string>& ids,
                                                 const std::vector<std::string>& labels,
                                                 const std::vector<Criterion>& criteria) {
  const std::size_t n = static_cast<std::size_t>(columns.cols());
  if (ids.size() != n || labels.size() != n) {
    throw DimensionError("leave_one_out_vectors: id/label counts differ from columns");
  }
  const std::vector<Criterion> usable = evaluable_criteria(criteria, n, "embedding set");
  std::size_t max_depth = 0;
  for (Criterion c : usable) {
    max_depth = std::max(max_depth, static_cast<std::size_t>(criterion_depth(c)));
  }

  std::vector<LooPrediction> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LooPrediction p;
    p.case_id = ids[i];
    p.truth = labels[i];
    if (!usable.empty()) {
      std::vector<RetrievalHit> hits;
      hits.reserve(n - 1);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = (columns.col(static_cast<Index>(i)) - columns.col(static_cast<Index>(j)))
                             .norm();
        hits.push_back({ids[j], labels[j], d});
      }
      std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.case_id < b.case_id;
      });
      if (hits.size() > max_depth) hits.resize(max_depth);
      fill_predictions(p, hits, usable);
    }
    out.push_back(std::move(p));
  }
  return out;
}

MetricsReport metrics_for_criterion(const std::vector<LooPrediction>& predictions, Criterion c,
                                    AbstainPolicy policy) {
  std::vector<std::optional<std::string>> preds;
  std::vector<std::string> truth;
  for (const auto& p : predictions) {
    auto it = p.predicted.find(c);
    if (it == p.predicted.end()) continue;
    preds.push_back(it->second);
    truth.push_back(p.truth);
  }
  if (preds.empty()) {
    throw std::invalid_argument(std::string("metrics_for_criterion: ") + criterion_name(c) +
                                " was not evaluated");
  }
  return compute_metrics(preds, truth, policy);
}

// ---------------------------------------------------------------------------
// Fold aggregation.
// ---------------------------------------------------------------------------

double sample_mean(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("sample_mean: empty");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_std(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double mean = sample_mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

FoldSummary summarize_folds(const std::vector<int>& folds,
                            const std::vector<MetricsReport>& reports) {
  if (folds.size() != reports.size() || reports.empty()) {
    throw std::invalid_argument("summarize_folds: mismatched or empty fold reports");
  }
  FoldSummary s;
  s.folds = folds;
  s.reports = reports;
  std::vector<double> acc, prec, rec, f1;
  for (const auto& r : reports) {
    acc.push_back(r.accuracy);
    prec.push_back(r.macro_precision);
    rec.push_back(r.macro_recall);
    f1.push_back(r.macro_f1);
  }
  s.mean_accuracy = sample_mean(acc);
  s.std_accuracy = sample_std(acc);
  s.mean_precision = sample_mean(prec);
  s.std_precision = sample_std(prec);
  s.mean_recall = sample_mean(rec);
  s.std_recall = sample_std(rec);
  s.mean_f1 = sample_mean(f1);
  s.std_f1 = sample_std(f1);
  return s;
}

// ---------------------------------------------------------------------------
// Cross-validation.
// ---------------------------------------------------------------------------

namespace {

int distinct_label_count(const std::vector<std::string>& labels) {
  return static_cast<int>(std::set<std::string>(labels.begin(), labels.end()).size());
}

}  // namespace

CrossValidationResult cross_validate(const Dataset& dataset, const FoldAssignment& folds,
                                     const PipelineConfig& config) {
  if (folds.k < 2) throw ConfigError("cross_validate: fold count must be >= 2");
  if (config.criteria.empty()) throw ConfigError("cross_validate: no criteria requested");

  CrossValidationResult result;
  std::map<std::pair<Representation, Criterion>, std::pair<std::vector<int>, std::vector<MetricsReport>>>
      acc, acc_excl;

  for (int fold = 0; fold < folds.k; ++fold) {
    const auto train_idx = folds.train_indices(dataset, fold);
    const auto test_idx = folds.test_indices(dataset, fold);
    const Dataset train = subset(dataset, train_idx);
    const Dataset test = subset(dataset, test_idx);
    if (train.empty() || test.empty() || distinct_label_count(train.labels()) < 2 ||
        distinct_label_count(test.labels()) < 2) {
      log_warn("cross_validate: fold " + std::to_string(fold) +
               " has fewer than 2 classes in a split; skipped");
      result.skipped_folds.push_back(fold);
      continue;
    }

    const ScaleParams scale_image = fit_minmax(train, Modality::Image);
    const ScaleParams scale_sequence = fit_minmax(train, Modality::Sequence);
    const MatrixXr f_train = apply_minmax(scale_image, train.embedding_matrix(Modality::Image));
    const MatrixXr g_train =
        apply_minmax(scale_sequence, train.embedding_matrix(Modality::Sequence));
    const MatrixXr f_test = apply_minmax(scale_image, test.embedding_matrix(Modality::Image));
    const MatrixXr g_test = apply_minmax(scale_sequence, test.embedding_matrix(Modality::Sequence));

    log_info("cross_validate: fold " + std::to_string(fold) + " training autoencoders (" +
             std::to_string(train.size()) + " cases)");
    auto [a_i, a_i_report] = train_hybrid<Real>(AeDirection::ImageToSeq, f_train, g_train,
                                                config.ae_image,
                                                derive_seed(config.seed, fold * 4 + 0));
    auto [a_s, a_s_report] = train_hybrid<Real>(AeDirection::SeqToImage, f_train, g_train,
                                                config.ae_sequence,
                                                derive_seed(config.seed, fold * 4 + 1));

    const MatrixXr u_train = a_i.encode(f_train);
    const MatrixXr v_train = a_s.encode(g_train);

    log_info("cross_validate: fold " + std::to_string(fold) + " training fusion network");
    Rng fusion_init(derive_seed(config.seed, fold * 4 + 2));
    FusionNetwork<Real> q0 = FusionNetwork<Real>::make(fusion_init, kBottleneckDim);
    auto [q, fusion_report] = train_fusion(std::move(q0), u_train, v_train, train.labels(),
                                           config.fusion,
                                           derive_seed(config.seed, fold * 4 + 3));

    const MatrixXr u_test = a_i.encode(f_test);
    const MatrixXr v_test = a_s.encode(g_test);
    const MatrixXr codes_test = q.code_batch(u_test, v_test);

    std::vector<ArchiveEntry> entries;
    entries.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      VectorXr code = codes_test.col(static_cast<Index>(i));
      entries.push_back({test.cases[i].case_id, test.cases[i].label,
                         binarize(code, config.fusion.threshold), std::move(code)});
    }
    Archive archive = Archive::build(entries, config.fusion.threshold);

    FoldRun run;
    run.fold = fold;
    run.ae_image_report = std::move(a_i_report);
    run.ae_sequence_report = std::move(a_s_report);
    run.fusion_report = std::move(fusion_report);
    run.test_entries = std::move(entries);

    run.predictions[Representation::BinaryMonogram] =
        leave_one_out(archive, Metric::Hamming, config.criteria);
    run.predictions[Representation::RealMonogram] =
        leave_one_out(archive, Metric::Euclidean, config.criteria);
    run.predictions[Representation::ImageUnimodal] =
        leave_one_out_vectors(f_test, test.ids(), test.labels(), config.criteria);
    run.predictions[Representation::SequenceUnimodal] =
        leave_one_out_vectors(g_test, test.ids(), test.labels(), config.criteria);
    if (config.include_latent_baselines) {
      run.predictions[Representation::ImageLatentUnimodal] =
          leave_one_out_vectors(u_test, test.ids(), test.labels(), config.criteria);
      run.predictions[Representation::SequenceLatentUnimodal] =
          leave_one_out_vectors(v_test, test.ids(), test.labels(), config.criteria);
    }

    for (const auto& [rep, preds] : run.predictions) {
      for (Criterion c : config.criteria) {
        if (preds.empty() || !preds.front().predicted.count(c)) continue;
        auto key = std::make_pair(rep, c);
        acc[key].first.push_back(fold);
        acc[key].second.push_back(metrics_for_criterion(preds, c, AbstainPolicy::ScoreAsError));
        acc_excl[key].first.push_back(fold);
        acc_excl[key].second.push_back(metrics_for_criterion(preds, c, AbstainPolicy::Exclude));
      }
    }
    result.folds.push_back(std::move(run));
  }

  if (result.folds.empty()) {
    throw TrainingError("cross_validate: every fold was skipped");
  }
  for (const auto& [key, pair] : acc) {
    result.summaries[key] = summarize_folds(pair.first, pair.second);
  }
  for (const auto& [key, pair] : acc_excl) {
    result.summaries_excluding_abstentions[key] = summarize_folds(pair.first, pair.second);
  }
  return result;
}

// ---------------------------------------------------------------------------
// XOR dissimilarity.
// ---------------------------------------------------------------------------

DissimilarityMatrix xor_dissimilarity(const std::vector<ArchiveEntry>& a,
                                      const std::vector<ArchiveEntry>& b) {
  DissimilarityMatrix m;
  m.distances.resize(static_cast<Index>(a.size()), static_cast<Index>(b.size()));
  for (const auto& e : a) {
    m.row_ids.push_back(e.case_id);
    m.row_labels.push_back(e.label);
  }
  for (const auto& e : b) {
    m.col_ids.push_back(e.case_id);
    m.col_labels.push_back(e.label);
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      m.distances(static_cast<Index>(i), static_cast<Index>(j)) = hamming(a[i].bits, b[j].bits);
    }
  }
  return m;
}

std::array<int, kCodeBits> xor_bit_flips(std::uint64_t from, std::uint64_t to) {
  std::array<int, kCodeBits> flips{};
  for (int i = 0; i < kCodeBits; ++i) {
    const int before = static_cast<int>((from >> i) & 1u);
    const int after = static_cast<int>((to >> i) & 1u);
    flips[static_cast<std::size_t>(i)] = after - before;
  }
  return flips;
}

// ---------------------------------------------------------------------------
// PCA.
// ---------------------------------------------------------------------------

PcaResult pca_project(const MatrixXr& columns, Index n_components) {
  const Index d = columns.rows();
  const Index n = columns.cols();
  if (n_components < 1) throw std::invalid_argument("pca_project: n_components must be >= 1");
  if (n < n_components) {
    throw std::invalid_argument("pca_project: " + std::to_string(n) + " samples for " +
                                std::to_string(n_components) + " components");
  }
  if (d < n_components) {
    throw std::invalid_argument("pca_project: vectors of length " + std::to_string(d) +
                                " cannot yield " + std::to_string(n_components) + " components");
  }
  if (n < 2) throw std::invalid_argument("pca_project: need at least 2 samples");

  const VectorXr mean = columns.rowwise().mean();
  MatrixXr centered = columns.colwise() - mean;
  MatrixXr covariance = centered * centered.transpose() / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<MatrixXr> solver(covariance);
  if (solver.info() != Eigen::Success) throw Error("pca_project: eigendecomposition failed");

  // Eigen returns ascending eigenvalues; flip to descending.
  VectorXr values = solver.eigenvalues().reverse();
  MatrixXr vectors = solver.eigenvectors().rowwise().reverse();

  const double tolerance = std::max(values[0], 0.0) * 1e-12;
  Index rank = 0;
  while (rank < values.size() && values[rank] > tolerance) ++rank;
  Index k = n_components;
  if (rank < n_components) {
    log_warn("pca_project: data is rank-deficient; returning " + std::to_string(rank) +
             " of " + std::to_string(n_components) + " requested components");
    k = rank;
  }

  PcaResult result;
  result.components = vectors.leftCols(k);
  result.explained_variance = values.head(k);
  // Deterministic sign: the largest-magnitude coefficient of each component
  // is positive.
  for (Index c = 0; c < k; ++c) {
    Index arg = 0;
    result.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (result.components(arg, c) < 0.0) result.components.col(c) *= -1.0;
  }
  result.projected = result.components.transpose() * centered;
  return result;
}

// ---------------------------------------------------------------------------
// Report tables.
// ---------------------------------------------------------------------------

namespace {

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

}  // namespace

std::vector<MetricsRow> metrics_rows(const CrossValidationResult& result,
                                     bool excluding_abstentions) {
  const auto& summaries =
      excluding_abstentions ? result.summaries_excluding_abstentions : result.summaries;
  std::vector<MetricsRow> rows;
  for (const auto& [key, summary] : summaries) {
    for (std::size_t i = 0; i < summary.folds.size(); ++i) {
      rows.push_back({key.first, key.second, summary.folds[i], summary.reports[i]});
    }
  }
  return rows;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  auto out = open_out(path);
  out << "representation,criterion,fold,accuracy,macro_p,macro_r,macro_f1\n";
  for (const auto& row : rows) {
    out << representation_name(row.representation) << ',' << criterion_name(row.criterion) << ','
        << row.fold << ',' << fixed6(row.metrics.accuracy) << ','
        << fixed6(row.metrics.macro_precision) << ',' << fixed6(row.metrics.macro_recall) << ','
        << fixed6(row.metrics.macro_f1) << '\n';
  }
  if (!out) throw IoError("failed writing: " + path);
}

void write_summary_csv(
    const std::string& path,
    const std::map<std::pair<Representation, Criterion>, FoldSummary>& summaries) {
  auto out = open_out(path);
  out << "representation,criterion,accuracy_mean,accuracy_std,macro_p_mean,macro_p_std,"
         "macro_r_mean,macro_r_std,macro_f1_mean,macro_f1_std\n";
  for (const auto& [key, s] : summaries) {
    out << representation_name(key.first) << ',' << criterion_name(key.second) << ','
        << fixed6(s.mean_accuracy) << ',' << fixed6(s.std_accuracy) << ','
        << fixed6(s.mean_precision) << ',' << fixed6(s.std_precision) << ','
        << fixed6(s.mean_recall) << ',' << fixed6(s.std_recall) << ',' << fixed6(s.mean_f1) << ','
        << fixed6(s.std_f1) << '\n';
  }
  if (!out) throw IoError("failed writing: " + path);
}

void write_loss_curves_csv(const std::string& path, const std::vector<FoldRun>& folds) {
  auto out = open_out(path);
  out << "fold,model,epoch,loss\n";
  for (const auto& run : folds) {
    const std::pair<const char*, const TrainReport*> curves[] = {
        {"autoencoder-image-to-sequence", &run.ae_image_report},
        {"autoencoder-sequence-to-image", &run.ae_sequence_report},
        {"fusion", &run.fusion_report},
    };
    for (const auto& [name, report] : curves) {
      for (std::size_t e = 0; e < report->epoch_losses.size(); ++e) {
        out << run.fold << ',' << name << ',' << (e + 1) << ','
            << format_real(report->epoch_losses[e]) << '\n';
      }
    }
  }
  if (!out) throw IoError("failed writing: " + path);
}

void write_reconstruction_csv(const std::string& path, const ReconstructionReport& report) {
  auto out = open_out(path);
  out << "case_id,modality,cosine,mse\n";
  for (const auto& row : report.rows) {
    out << row.case_id << ',' << row.modality << ',' << format_real(row.cosine) << ','
        << format_real(row.mse) << '\n';
  }
  if (!out) throw IoError("failed writing: " + path);
}

void write_reconstruction_summary_csv(const std::string& path,
                                      const ReconstructionReport& report) {
  auto out = open_out(path);
  out << "modality,median_cosine,mean_mse\n";
  out << "image," << format_real(report.median_cosine_image) << ','
      << format_real(report.mean_mse_image) << '\n';
  out << "sequence," << format_real(report.median_cosine_sequence) << ','
      << format_real(report.mean_mse_sequence) << '\n';
  if (!out) throw IoError("failed writing: " + path);
}

void write_dissimilarity_csv(const std::string& path, const DissimilarityMatrix& matrix) {
  auto out = open_out(path);
  out << "case_id,label";
  for (const auto& id : matrix.col_ids) out << ',' << id;
  out << "\n,";
  for (const auto& label : matrix.col_labels) out << ',' << label;
  out << '\n';
  for (Index i = 0; i < matrix.distances.rows(); ++i) {
    out << matrix.row_ids[static_cast<std::size_t>(i)] << ','
        << matrix.row_labels[static_cast<std::size_t>(i)];
    for (Index j = 0; j < matrix.distances.cols(); ++j) out << ',' << matrix.distances(i, j);
    out << '\n';
  }
  if (!out) throw IoError("failed writing: " + path);
}

void write_xor_bit_grids_csv(const std::string& path, const std::vector<ArchiveEntry>& a,
                             const std::vector<ArchiveEntry>& b) {
  auto out = open_out(path);
  out << "row_case_id,col_case_id";
  for (int i = 0; i < kCodeBits; ++i) out << ",bit_" << i;
  out << '\n';
  for (const auto& ea : a) {
    for (const auto& eb : b) {
      out << ea.case_id << ',' << eb.case_id;
      for (int flip : xor_bit_flips(ea.bits, eb.bits)) out << ',' << flip;
      out << '\n';
    }
  }
  if (!out) throw IoError("failed writing: " + path);
}

}  // namespace marblix
