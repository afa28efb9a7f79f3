#include "marblix/archive.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace marblix {

double euclidean_code(const VectorXr& a, const VectorXr& b) {
  if (a.size() != kCodeBits || b.size() != kCodeBits) {
    throw DimensionError("euclidean_code: codes must have length " + std::to_string(kCodeBits));
  }
  return (a - b).norm();
}

const char* metric_name(Metric m) { return m == Metric::Hamming ? "hamming" : "euclidean"; }

Metric parse_metric(const std::string& name) {
  if (name == "hamming") return Metric::Hamming;
  if (name == "euclidean") return Metric::Euclidean;
  throw ConfigError("unknown metric '" + name + "' (expected hamming or euclidean)");
}

Archive Archive::build(std::vector<ArchiveEntry> entries, double threshold) {
  Archive archive(threshold);
  for (auto& e : entries) archive.insert(std::move(e));
  return archive;
}

void Archive::insert(ArchiveEntry entry) {
  if (entry.case_id.empty()) throw IngestError("archive: empty case_id");
  if (index_.count(entry.case_id)) {
    throw IngestError("archive: duplicate case_id '" + entry.case_id + "'");
  }
  if (binarize(entry.real_code, threshold_) != entry.bits) {
    throw IngestError("archive: bits of case '" + entry.case_id +
                      "' do not match its real code under threshold " + format_real(threshold_));
  }
  index_[entry.case_id] = entries_.size();
  entries_.push_back(std::move(entry));
}

const ArchiveEntry* Archive::find(const std::string& case_id) const {
  auto it = index_.find(case_id);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

void Archive::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open archive for writing: " + path);
  out << "#marblix-archive v1 code_width=" << kCodeBits << " threshold=" << format_real(threshold_)
      << '\n';
  for (const auto& e : entries_) {
    out << e.case_id << ',' << e.label << ',' << code_to_hex(e.bits);
    for (Index i = 0; i < e.real_code.size(); ++i) out << ',' << format_real(e.real_code[i]);
    out << '\n';
  }
  if (!out) throw IoError("failed writing archive: " + path);
}

namespace {

double parse_real_field(const std::string& field, int line_no, const std::string& path) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(path + " line " + std::to_string(line_no) + ": malformed number '" + field +
                     "'");
  }
  return v;
}

}  // namespace

Archive Archive::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open archive: " + path);

  std::string line;
  int line_no = 0;
  bool have_header = false;
  Archive archive;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      std::istringstream hs(line);
      std::string magic, version, width, threshold;
      hs >> magic >> version >> width >> threshold;
      if (magic != "#marblix-archive" || version != "v1") {
        throw ParseError(path + " line " + std::to_string(line_no) +
                         ": expected '#marblix-archive v1' header");
      }
      if (width.rfind("code_width=", 0) != 0 ||
          width.substr(11) != std::to_string(kCodeBits)) {
        throw SchemaError(path + ": unsupported code width (expected " +
                          std::to_string(kCodeBits) + ")");
      }
      if (threshold.rfind("threshold=", 0) != 0) {
        throw ParseError(path + " line " + std::to_string(line_no) + ": missing threshold");
      }
      archive.threshold_ = parse_real_field(threshold.substr(10), line_no, path);
      have_header = true;
      continue;
    }

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t pos = line.find(',', start);
      if (pos == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    if (fields.size() != 3 + kCodeBits) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": expected " +
                       std::to_string(3 + kCodeBits) + " fields, got " +
                       std::to_string(fields.size()));
    }
    ArchiveEntry entry;
    entry.case_id = fields[0];
    entry.label = fields[1];
    try {
      entry.bits = hex_to_code(fields[2]);
    } catch (const ParseError& e) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    entry.real_code.resize(kCodeBits);
    for (int i = 0; i < kCodeBits; ++i) {
      entry.real_code[i] =
          parse_real_field(fields[static_cast<std::size_t>(i) + 3], line_no, path);
    }
    archive.insert(std::move(entry));
  }
  if (!have_header && archive.empty()) {
    throw ParseError(path + ": empty archive file (missing header)");
  }
  return archive;
}

std::vector<RetrievalHit> search_topk(const Archive& archive, const Monogram& query,
                                      std::size_t k, Metric metric,
                                      const std::optional<std::string>& exclude) {
  if (k < 1) throw std::invalid_argument("search_topk: k must be >= 1");

  std::vector<RetrievalHit> hits;
  hits.reserve(archive.size());
  for (const auto& e : archive.entries()) {
    if (exclude && e.case_id == *exclude) continue;
    const double d = metric == Metric::Hamming
                         ? static_cast<double>(hamming(e.bits, query.bits))
                         : euclidean_code(e.real_code, query.real_code);
    hits.push_back({e.case_id, e.label, d});
  }
  if (hits.empty()) {
    log_warn("search_topk: archive is empty after exclusion");
    return hits;
  }
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.case_id < b.case_id;
  });
  if (k < hits.size()) {
    hits.resize(k);
  } else if (k > hits.size()) {
    log_warn("search_topk: k = " + std::to_string(k) + " exceeds available entries (" +
             std::to_string(hits.size()) + "); returning all");
  }
  return hits;
}

VoteResult majority_vote(const std::vector<RetrievalHit>& hits, int n) {
  if (n < 1) throw std::invalid_argument("majority_vote: n must be >= 1");
  if (static_cast<int>(hits.size()) < n) {
    throw std::invalid_argument("majority_vote: only " + std::to_string(hits.size()) +
                                " hits for n = " + std::to_string(n));
  }
  std::map<std::string, int> counts;
  for (int i = 0; i < n; ++i) counts[hits[static_cast<std::size_t>(i)].label]++;

  VoteResult result;
  result.n = n;
  for (const auto& [label, count] : counts) {
    if (count > result.support) {
      result.support = count;
      result.predicted = label;
    }
  }
  const int quorum = n / 2 + 1;
  if (result.support < quorum) result.predicted.reset();
  return result;
}

}  // namespace marblix
