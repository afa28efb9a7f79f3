#pragma once

#include "marblix/monogram.hpp"

#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace marblix {

// Popcount of the XOR; the number of differing bits.
inline int hamming(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

// L2 distance between two real monogram codes.
double euclidean_code(const VectorXr& a, const VectorXr& b);

enum class Metric { Hamming, Euclidean };

const char* metric_name(Metric m);
Metric parse_metric(const std::string& name);

struct ArchiveEntry {
  std::string case_id;
  std::string label;
  std::uint64_t bits = 0;
  VectorXr real_code;
};

// ---------------------------------------------------------------------------
// Monogram archive: insertion-ordered entries with unique case ids, a linear
// popcount scan for retrieval, and a line-oriented persistent form.
// ---------------------------------------------------------------------------

class Archive {
 public:
  explicit Archive(double threshold = 0.0) : threshold_(threshold) {}

  static Archive build(std::vector<ArchiveEntry> entries, double threshold = 0.0);

  // Rejects duplicate ids and entries whose bits disagree with their
  // real_code under the archive threshold.
  void insert(ArchiveEntry entry);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<ArchiveEntry>& entries() const { return entries_; }
  const ArchiveEntry* find(const std::string& case_id) const;
  double threshold() const { return threshold_; }

  void save(const std::string& path) const;
  static Archive load(const std::string& path);

 private:
  std::vector<ArchiveEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  double threshold_ = 0.0;
};

struct RetrievalHit {
  std::string case_id;
  std::string label;
  double distance;  // integer-valued for Hamming
};

// k nearest entries under the metric, sorted by (distance, case_id). The
// excluded case, if named, is removed before ranking; asking for more hits
// than remain returns everything with a warning.
std::vector<RetrievalHit> search_topk(const Archive& archive, const Monogram& query,
                                      std::size_t k, Metric metric,
                                      const std::optional<std::string>& exclude = {});

struct VoteResult {
  int n = 0;
  std::optional<std::string> predicted;  // empty = abstain
  int support = 0;                       // count of the modal label among the top n
};

// Majority vote over the top n hits: predict the modal label iff its count
// reaches the floor(n/2) + 1 quorum, otherwise abstain.
VoteResult majority_vote(const std::vector<RetrievalHit>& hits, int n);

}  // namespace marblix
