#include "marblix/dataset.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace marblix {

namespace {

constexpr const char* kDumpHeader = "#marblix-embedding-dump";

std::vector<std::string> split_csv(const std::string& line) {
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
  return fields;
}

double parse_real(const std::string& field, int line_no) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("line " + std::to_string(line_no) + ": malformed number '" + field + "'");
  }
  return v;
}

long parse_int(const std::string& field, int line_no) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": malformed integer '" + field + "'");
  }
  return v;
}

}  // namespace

const char* modality_tag(Modality m) { return m == Modality::Image ? "image" : "sequence"; }

MatrixXr Dataset::embedding_matrix(Modality m) const {
  MatrixXr out(dim(m), static_cast<Index>(cases.size()));
  for (std::size_t i = 0; i < cases.size(); ++i) {
    out.col(static_cast<Index>(i)) = embedding(i, m);
  }
  return out;
}

std::vector<std::string> Dataset::labels() const {
  std::vector<std::string> out;
  out.reserve(cases.size());
  for (const auto& c : cases) out.push_back(c.label);
  return out;
}

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(cases.size());
  for (const auto& c : cases) out.push_back(c.case_id);
  return out;
}

std::vector<std::string> Dataset::distinct_labels() const {
  std::set<std::string> s;
  for (const auto& c : cases) s.insert(c.label);
  return {s.begin(), s.end()};
}

Index EmbeddingDump::dim_of(const std::string& tag) const {
  for (const auto& [t, d] : dims) {
    if (t == tag) return d;
  }
  throw SchemaError("unknown modality tag '" + tag + "'");
}

EmbeddingDump read_embedding_dump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding dump: " + path);

  EmbeddingDump dump;
  std::map<std::string, Index> declared;
  bool have_header = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      std::istringstream hs(line);
      std::string magic, version;
      hs >> magic >> version;
      if (magic != kDumpHeader || version != "v1") {
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected header '" + kDumpHeader + " v1 <tag>=<dim>...'");
      }
      std::string pair;
      while (hs >> pair) {
        std::size_t eq = pair.find('=');
        if (eq == std::string::npos || eq == 0) {
          throw ParseError("line " + std::to_string(line_no) + ": bad header entry '" + pair + "'");
        }
        const std::string tag = pair.substr(0, eq);
        const long d = parse_int(pair.substr(eq + 1), line_no);
        if (d <= 0) {
          throw SchemaError("line " + std::to_string(line_no) + ": non-positive dimension for '" +
                            tag + "'");
        }
        if (declared.count(tag)) {
          throw ParseError("line " + std::to_string(line_no) + ": duplicate tag '" + tag + "'");
        }
        declared[tag] = static_cast<Index>(d);
        dump.dims.emplace_back(tag, static_cast<Index>(d));
      }
      if (dump.dims.empty()) {
        throw ParseError("line " + std::to_string(line_no) + ": header declares no dimensions");
      }
      have_header = true;
      continue;
    }

    std::vector<std::string> fields = split_csv(line);
    if (fields.size() < 4) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected case_id,label,tag,values...");
    }
    DumpRow row;
    row.case_id = fields[0];
    row.label = fields[1];
    row.tag = fields[2];
    if (row.case_id.empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty case_id");
    }
    auto it = declared.find(row.tag);
    if (it == declared.end()) {
      throw SchemaError("line " + std::to_string(line_no) + ": undeclared tag '" + row.tag +
                        "' for case '" + row.case_id + "'");
    }
    const Index expected = it->second;
    const Index got = static_cast<Index>(fields.size()) - 3;
    if (got != expected) {
      throw SchemaError("line " + std::to_string(line_no) + ": case '" + row.case_id + "' has " +
                        std::to_string(got) + " values, declared " + std::to_string(expected));
    }
    row.values.resize(expected);
    for (Index i = 0; i < expected; ++i) {
      const double v = parse_real(fields[static_cast<std::size_t>(i) + 3], line_no);
      if (!std::isfinite(v)) {
        throw ParseError("line " + std::to_string(line_no) + ": non-finite value in case '" +
                         row.case_id + "'");
      }
      row.values[i] = v;
    }
    dump.rows.push_back(std::move(row));
  }
  return dump;
}

void write_embedding_dump(const std::string& path, const EmbeddingDump& dump) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kDumpHeader << " v1";
  for (const auto& [tag, d] : dump.dims) out << ' ' << tag << '=' << d;
  out << '\n';
  for (const auto& row : dump.rows) {
    out << row.case_id << ',' << row.label << ',' << row.tag;
    for (Index i = 0; i < row.values.size(); ++i) out << ',' << format_real(row.values[i]);
    out << '\n';
  }
  if (!out) throw IoError("failed writing: " + path);
}

LoadResult load_dataset(const std::string& path, std::optional<Index> expected_image_dim,
                        std::optional<Index> expected_sequence_dim) {
  EmbeddingDump dump = read_embedding_dump(path);

  LoadResult result;
  if (dump.dims.empty() && dump.rows.empty()) {
    result.dataset.image_dim = expected_image_dim.value_or(0);
    result.dataset.sequence_dim = expected_sequence_dim.value_or(0);
    return result;
  }

  const Index image_dim = dump.dim_of("image");
  const Index sequence_dim = dump.dim_of("sequence");
  if (expected_image_dim && *expected_image_dim != image_dim) {
    throw SchemaError(path + ": image dimension is " + std::to_string(image_dim) + ", expected " +
                      std::to_string(*expected_image_dim));
  }
  if (expected_sequence_dim && *expected_sequence_dim != sequence_dim) {
    throw SchemaError(path + ": sequence dimension is " + std::to_string(sequence_dim) +
                      ", expected " + std::to_string(*expected_sequence_dim));
  }
  result.dataset.image_dim = image_dim;
  result.dataset.sequence_dim = sequence_dim;

  struct Partial {
    std::string label;
    std::optional<VectorXr> f, g;
  };
  std::map<std::string, Partial> by_id;
  std::vector<std::string> order;
  for (const auto& row : dump.rows) {
    auto [it, inserted] = by_id.try_emplace(row.case_id);
    Partial& p = it->second;
    if (inserted) {
      order.push_back(row.case_id);
      p.label = row.label;
    } else if (p.label != row.label) {
      throw IngestError("case '" + row.case_id + "' has conflicting labels '" + p.label +
                        "' and '" + row.label + "'");
    }
    if (row.tag == "image") {
      if (p.f) throw IngestError("duplicate image record for case '" + row.case_id + "'");
      p.f = row.values;
    } else if (row.tag == "sequence") {
      if (p.g) throw IngestError("duplicate sequence record for case '" + row.case_id + "'");
      p.g = row.values;
    } else {
      throw SchemaError("case '" + row.case_id + "': tag '" + row.tag +
                        "' is not a dataset modality");
    }
  }

  for (const auto& id : order) {
    Partial& p = by_id[id];
    if (p.f && p.g) {
      result.dataset.cases.push_back({id, p.label, std::move(*p.f), std::move(*p.g)});
    } else {
      ++result.rejected_partial;
    }
  }
  if (result.rejected_partial > 0) {
    log_warn(path + ": rejected " + std::to_string(result.rejected_partial) +
             " case(s) missing one modality");
  }
  return result;
}

void write_dataset(const std::string& path, const Dataset& dataset) {
  EmbeddingDump dump;
  dump.dims = {{"image", dataset.image_dim}, {"sequence", dataset.sequence_dim}};
  dump.rows.reserve(dataset.cases.size() * 2);
  for (const auto& c : dataset.cases) {
    dump.rows.push_back({c.case_id, c.label, "image", c.f});
    dump.rows.push_back({c.case_id, c.label, "sequence", c.g});
  }
  write_embedding_dump(path, dump);
}

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.image_dim = dataset.image_dim;
  out.sequence_dim = dataset.sequence_dim;
  out.cases.reserve(indices.size());
  for (std::size_t i : indices) out.cases.push_back(dataset.cases.at(i));
  return out;
}

int ScaleParams::constant_count() const {
  int n = 0;
  for (Index i = 0; i < dim(); ++i) n += is_constant(i) ? 1 : 0;
  return n;
}

ScaleParams fit_minmax(const Dataset& dataset, Modality modality) {
  if (dataset.empty()) throw std::invalid_argument("fit_minmax: empty dataset");
  const Index d = dataset.dim(modality);
  ScaleParams params;
  params.min = dataset.embedding(0, modality);
  params.max = params.min;
  for (std::size_t i = 1; i < dataset.size(); ++i) {
    const VectorXr& e = dataset.embedding(i, modality);
    params.min = params.min.cwiseMin(e);
    params.max = params.max.cwiseMax(e);
  }
  if (params.min.size() != d) throw DimensionError("fit_minmax: inconsistent dimensions");
  const int constants = params.constant_count();
  if (constants > 0) {
    log_debug(std::string("fit_minmax(") + modality_tag(modality) + "): " +
              std::to_string(constants) + " constant dimension(s)");
  }
  return params;
}

VectorXr apply_minmax(const ScaleParams& params, const VectorXr& e) {
  if (e.size() != params.dim()) {
    throw DimensionError("apply_minmax: embedding has " + std::to_string(e.size()) +
                         " dims, params have " + std::to_string(params.dim()));
  }
  VectorXr out(e.size());
  for (Index i = 0; i < e.size(); ++i) {
    if (params.is_constant(i)) {
      out[i] = 0.0;
    } else {
      out[i] = std::clamp((e[i] - params.min[i]) / (params.max[i] - params.min[i]), 0.0, 1.0);
    }
  }
  return out;
}

MatrixXr apply_minmax(const ScaleParams& params, const MatrixXr& columns) {
  MatrixXr out(columns.rows(), columns.cols());
  for (Index j = 0; j < columns.cols(); ++j) {
    out.col(j) = apply_minmax(params, VectorXr(columns.col(j)));
  }
  return out;
}

void save_scale_params(const std::string& path, const ScaleParams& image,
                       const ScaleParams& sequence) {
  nlohmann::json j;
  j["version"] = 1;
  for (const auto& [name, p] :
       {std::pair<const char*, const ScaleParams*>{"image", &image}, {"sequence", &sequence}}) {
    nlohmann::json entry;
    entry["min"] = std::vector<double>(p->min.data(), p->min.data() + p->min.size());
    entry["max"] = std::vector<double>(p->max.data(), p->max.data() + p->max.size());
    j[name] = std::move(entry);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

std::pair<ScaleParams, ScaleParams> load_scale_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scale params: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  auto read_one = [&](const char* name) {
    if (!j.contains(name)) throw SchemaError(path + ": missing '" + std::string(name) + "'");
    ScaleParams p;
    std::vector<double> mn = j[name]["min"].get<std::vector<double>>();
    std::vector<double> mx = j[name]["max"].get<std::vector<double>>();
    if (mn.size() != mx.size()) throw SchemaError(path + ": min/max length mismatch");
    p.min = Eigen::Map<const VectorXr>(mn.data(), static_cast<Index>(mn.size()));
    p.max = Eigen::Map<const VectorXr>(mx.data(), static_cast<Index>(mx.size()));
    for (Index i = 0; i < p.dim(); ++i) {
      if (p.min[i] > p.max[i]) throw SchemaError(path + ": min > max at dimension " +
                                                 std::to_string(i));
    }
    return p;
  };
  return {read_one("image"), read_one("sequence")};
}

int FoldAssignment::fold(const std::string& case_id) const {
  auto it = fold_of.find(case_id);
  if (it == fold_of.end()) throw Error("no fold assignment for case '" + case_id + "'");
  return it->second;
}

std::vector<std::size_t> FoldAssignment::test_indices(const Dataset& dataset,
                                                      int fold_index) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (fold(dataset.cases[i].case_id) == fold_index) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(const Dataset& dataset,
                                                       int fold_index) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (fold(dataset.cases[i].case_id) != fold_index) out.push_back(i);
  }
  return out;
}

FoldAssignment make_folds(const Dataset& dataset, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("make_folds: k must be >= 2");
  if (static_cast<std::size_t>(k) > dataset.size()) {
    throw ConfigError("make_folds: k = " + std::to_string(k) + " exceeds dataset size " +
                      std::to_string(dataset.size()));
  }

  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_label[dataset.cases[i].label].push_back(i);
  }

  Rng rng(seed);
  FoldAssignment assignment;
  assignment.k = k;
  // Per class, deal shuffled members onto folds through a cursor shared
  // across classes so remainders do not pile onto fold 0.
  std::size_t cursor = 0;
  for (auto& [label, members] : by_label) {
    if (members.size() < static_cast<std::size_t>(k)) {
      log_warn("make_folds: class '" + label + "' has " + std::to_string(members.size()) +
               " member(s) < k = " + std::to_string(k) + "; stratification relaxed");
    }
    rng.shuffle(members);
    for (std::size_t idx : members) {
      assignment.fold_of[dataset.cases[idx].case_id] = static_cast<int>(cursor % k);
      ++cursor;
    }
  }
  return assignment;
}

void SynthConfig::validate() const {
  if (classes < 2) throw ConfigError("synth: classes must be >= 2");
  if (cases_per_class < 2) throw ConfigError("synth: cases_per_class must be >= 2");
  if (image_dim < 1) throw ConfigError("synth: image_dim must be >= 1");
  if (sequence_dim < 1) throw ConfigError("synth: sequence_dim must be >= 1");
  if (signal_image < 0.0 || signal_image > 1.0) {
    throw ConfigError("synth: signal_image must be in [0, 1]");
  }
  if (signal_sequence < 0.0 || signal_sequence > 1.0) {
    throw ConfigError("synth: signal_sequence must be in [0, 1]");
  }
  if (noise < 0.0) throw ConfigError("synth: noise must be >= 0");
}

Dataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  const auto draw = [&rng](Index d) {
    VectorXr v(d);
    for (Index i = 0; i < d; ++i) v[i] = rng.normal();
    return v;
  };

  std::vector<VectorXr> image_proto, sequence_proto;
  for (int c = 0; c < cfg.classes; ++c) {
    image_proto.push_back(draw(cfg.image_dim));
    sequence_proto.push_back(draw(cfg.sequence_dim));
  }

  Dataset dataset;
  dataset.image_dim = cfg.image_dim;
  dataset.sequence_dim = cfg.sequence_dim;
  char id[64];
  for (int c = 0; c < cfg.classes; ++c) {
    for (int i = 0; i < cfg.cases_per_class; ++i) {
      std::snprintf(id, sizeof id, "case_%02d_%04d", c, i);
      CaseRecord rec;
      rec.case_id = id;
      rec.label = "class_" + std::to_string(c);
      rec.f = cfg.signal_image * image_proto[c] + cfg.noise * draw(cfg.image_dim);
      rec.g = cfg.signal_sequence * sequence_proto[c] + cfg.noise * draw(cfg.sequence_dim);
      dataset.cases.push_back(std::move(rec));
    }
  }
  return dataset;
}

}  // namespace marblix
