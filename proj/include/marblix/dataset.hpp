#pragma once

#include "marblix/common.hpp"

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace marblix {

enum class Modality { Image, Sequence };

const char* modality_tag(Modality m);

// One patient: both modality embeddings must be present.
struct CaseRecord {
  std::string case_id;
  std::string label;
  VectorXr f;  // image-modality embedding
  VectorXr g;  // sequence-modality embedding
};

struct Dataset {
  Index image_dim = 0;
  Index sequence_dim = 0;
  std::vector<CaseRecord> cases;

  std::size_t size() const { return cases.size(); }
  bool empty() const { return cases.empty(); }

  Index dim(Modality m) const { return m == Modality::Image ? image_dim : sequence_dim; }

  const VectorXr& embedding(std::size_t case_index, Modality m) const {
    return m == Modality::Image ? cases[case_index].f : cases[case_index].g;
  }

  // dim x n matrix with one column per case, in dataset order.
  MatrixXr embedding_matrix(Modality m) const;
  std::vector<std::string> labels() const;
  std::vector<std::string> ids() const;
  std::vector<std::string> distinct_labels() const;  // sorted
};

// ---------------------------------------------------------------------------
// Embedding dump files. Line-oriented text: a header declaring the vector
// length per modality tag, then one record per line:
//   case_id,label,tag,v0,v1,...
// The same container carries latent dumps (tags latent-u / latent-v) and PCA
// exports.
// ---------------------------------------------------------------------------

struct DumpRow {
  std::string case_id;
  std::string label;
  std::string tag;
  VectorXr values;
};

struct EmbeddingDump {
  std::vector<std::pair<std::string, Index>> dims;  // tag -> declared length
  std::vector<DumpRow> rows;

  Index dim_of(const std::string& tag) const;
};

EmbeddingDump read_embedding_dump(const std::string& path);
void write_embedding_dump(const std::string& path, const EmbeddingDump& dump);

struct LoadResult {
  Dataset dataset;
  int rejected_partial = 0;  // cases missing one modality
};

// Loads a dataset dump with tags "image" and "sequence". Cases missing either
// modality are rejected and counted. expected_* validate the header when set.
LoadResult load_dataset(const std::string& path, std::optional<Index> expected_image_dim = {},
                        std::optional<Index> expected_sequence_dim = {});

void write_dataset(const std::string& path, const Dataset& dataset);

// Copy of the named cases, in the given order.
Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices);

// ---------------------------------------------------------------------------
// Min-max rescaling. Statistics are fit per dimension on the training split
// only; application clamps to [0, 1] so held-out values cannot escape the
// fitted range. Constant dimensions map to 0.
// ---------------------------------------------------------------------------

struct ScaleParams {
  VectorXr min;
  VectorXr max;

  Index dim() const { return min.size(); }
  bool is_constant(Index i) const { return min[i] == max[i]; }
  int constant_count() const;
};

ScaleParams fit_minmax(const Dataset& dataset, Modality modality);
VectorXr apply_minmax(const ScaleParams& params, const VectorXr& e);
MatrixXr apply_minmax(const ScaleParams& params, const MatrixXr& columns);

void save_scale_params(const std::string& path, const ScaleParams& image,
                       const ScaleParams& sequence);
std::pair<ScaleParams, ScaleParams> load_scale_params(const std::string& path);

// ---------------------------------------------------------------------------
// Stratified fold assignment, deterministic per seed.
// ---------------------------------------------------------------------------

struct FoldAssignment {
  int k = 0;
  std::unordered_map<std::string, int> fold_of;

  int fold(const std::string& case_id) const;
  // Case indices of the test / train split of one fold, in dataset order.
  std::vector<std::size_t> test_indices(const Dataset& dataset, int fold_index) const;
  std::vector<std::size_t> train_indices(const Dataset& dataset, int fold_index) const;
};

FoldAssignment make_folds(const Dataset& dataset, int k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic multimodal dataset: per-class hidden prototypes plus Gaussian
// noise, with a tunable class-signal strength per modality.
// ---------------------------------------------------------------------------

struct SynthConfig {
  int classes = 2;
  int cases_per_class = 100;
  Index image_dim = 768;
  Index sequence_dim = 768;
  double signal_image = 1.0;     // in [0, 1]
  double signal_sequence = 1.0;  // in [0, 1]
  double noise = 0.05;
  std::uint64_t seed = 17;

  void validate() const;  // throws ConfigError naming the bad field
};

Dataset synth_generate(const SynthConfig& cfg);

}  // namespace marblix
