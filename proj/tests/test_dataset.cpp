#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "marblix/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

using namespace marblix;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& name, const std::string& content = "")
      : path(fs::temp_directory_path() / name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { fs::remove(path); }
  std::string str() const { return path.string(); }
};

struct WarningCapture {
  std::vector<std::string> messages;
  WarningCapture() {
    set_log_sink([this](LogLevel level, const std::string& msg) {
      if (level == LogLevel::Warn) messages.push_back(msg);
    });
  }
  ~WarningCapture() { set_log_sink({}); }
  bool contains(const std::string& needle) const {
    for (const auto& m : messages) {
      if (m.find(needle) != std::string::npos) return true;
    }
    return false;
  }
};

Dataset two_class_dataset(int per_class_a, int per_class_b) {
  Dataset d;
  d.image_dim = 1;
  d.sequence_dim = 1;
  for (int i = 0; i < per_class_a; ++i) {
    d.cases.push_back({"a" + std::to_string(i), "A", VectorXr::Constant(1, i), VectorXr::Zero(1)});
  }
  for (int i = 0; i < per_class_b; ++i) {
    d.cases.push_back({"b" + std::to_string(i), "B", VectorXr::Constant(1, i), VectorXr::Zero(1)});
  }
  return d;
}

double mean_pairwise_cosine(const std::vector<const VectorXr*>& xs,
                            const std::vector<const VectorXr*>& ys) {
  double sum = 0.0;
  int count = 0;
  for (const auto* x : xs) {
    for (const auto* y : ys) {
      if (x == y) continue;
      sum += x->dot(*y) / (x->norm() * y->norm());
      ++count;
    }
  }
  return sum / count;
}

}  // namespace

TEST_CASE("load_dataset keeps complete cases and counts partial ones") {
  TempFile file("mblx_load.txt",
                "#marblix-embedding-dump v1 image=3 sequence=2\n"
                "c1,lung,image,0.1,0.2,0.3\n"
                "c1,lung,sequence,1,2\n"
                "c2,kidney,image,4,5,6\n"
                "c2,kidney,sequence,7,8\n"
                "c3,lung,sequence,0,1\n"
                "c3,lung,image,9,9,9\n"
                "c4,lung,image,1,1,1\n");  // image only
  WarningCapture warnings;
  LoadResult result = load_dataset(file.str());
  CHECK(result.dataset.size() == 3);
  CHECK(result.rejected_partial == 1);
  CHECK(result.dataset.image_dim == 3);
  CHECK(result.dataset.sequence_dim == 2);
  CHECK(result.dataset.cases[0].case_id == "c1");
  CHECK(result.dataset.cases[2].case_id == "c3");  // order of first appearance
  CHECK(result.dataset.cases[1].g[1] == 8.0);
  CHECK(warnings.contains("rejected 1"));
}

TEST_CASE("load_dataset on an empty file yields an empty dataset") {
  TempFile file("mblx_empty.txt", "");
  LoadResult result = load_dataset(file.str());
  CHECK(result.dataset.empty());
  CHECK(result.rejected_partial == 0);
}

TEST_CASE("load_dataset rejects a row whose length disagrees with the header") {
  TempFile file("mblx_short.txt",
                "#marblix-embedding-dump v1 image=3 sequence=2\n"
                "c1,lung,image,0.1,0.2\n");
  CHECK_THROWS_WITH_AS(load_dataset(file.str()), doctest::Contains("line 2"), SchemaError);
}

TEST_CASE("load_dataset names the line of a malformed number") {
  TempFile file("mblx_badnum.txt",
                "#marblix-embedding-dump v1 image=2 sequence=2\n"
                "c1,lung,image,0.1,0.2\n"
                "c1,lung,sequence,0.3,zebra\n");
  CHECK_THROWS_WITH_AS(load_dataset(file.str()), doctest::Contains("line 3"), ParseError);
}

TEST_CASE("load_dataset rejects non-finite values") {
  TempFile file("mblx_inf.txt",
                "#marblix-embedding-dump v1 image=2 sequence=2\n"
                "c1,lung,image,inf,0.2\n");
  CHECK_THROWS_AS(load_dataset(file.str()), ParseError);
}

TEST_CASE("load_dataset rejects duplicate records and conflicting labels") {
  TempFile dup("mblx_dup.txt",
               "#marblix-embedding-dump v1 image=1 sequence=1\n"
               "c1,lung,image,1\n"
               "c1,lung,image,2\n");
  CHECK_THROWS_AS(load_dataset(dup.str()), IngestError);

  TempFile conflict("mblx_conflict.txt",
                    "#marblix-embedding-dump v1 image=1 sequence=1\n"
                    "c1,lung,image,1\n"
                    "c1,kidney,sequence,2\n");
  CHECK_THROWS_AS(load_dataset(conflict.str()), IngestError);
}

TEST_CASE("load_dataset validates the declared dimensions when asked") {
  TempFile file("mblx_dims.txt",
                "#marblix-embedding-dump v1 image=3 sequence=2\n"
                "c1,lung,image,1,2,3\n"
                "c1,lung,sequence,1,2\n");
  CHECK_NOTHROW(load_dataset(file.str(), 3, 2));
  CHECK_THROWS_AS(load_dataset(file.str(), 768, 2), SchemaError);
}

TEST_CASE("dataset write/load round trip is value-exact") {
  SynthConfig cfg;
  cfg.classes = 2;
  cfg.cases_per_class = 5;
  cfg.image_dim = 7;
  cfg.sequence_dim = 4;
  cfg.noise = 0.3;
  cfg.seed = 99;
  Dataset original = synth_generate(cfg);

  TempFile file("mblx_roundtrip.txt");
  write_dataset(file.str(), original);
  Dataset loaded = load_dataset(file.str()).dataset;

  REQUIRE(loaded.size() == original.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    CHECK(loaded.cases[i].case_id == original.cases[i].case_id);
    CHECK(loaded.cases[i].label == original.cases[i].label);
    CHECK(loaded.cases[i].f == original.cases[i].f);  // bit-exact via shortest round trip
    CHECK(loaded.cases[i].g == original.cases[i].g);
  }
}

TEST_CASE("fit_minmax computes per-dimension statistics") {
  Dataset d;
  d.image_dim = 2;
  d.sequence_dim = 1;
  auto add = [&d](const std::string& id, double x0, double x1, double g0) {
    VectorXr f(2);
    f << x0, x1;
    d.cases.push_back({id, "L", f, VectorXr::Constant(1, g0)});
  };
  add("c1", 2.0, 5.0, -1.0);
  add("c2", 4.0, 5.0, 0.0);
  add("c3", 6.0, 5.0, 1.0);

  ScaleParams image = fit_minmax(d, Modality::Image);
  CHECK(image.min[0] == 2.0);
  CHECK(image.max[0] == 6.0);
  CHECK(image.is_constant(1));  // {5, 5, 5}
  CHECK(image.min[1] == 5.0);
  CHECK(image.max[1] == 5.0);

  ScaleParams sequence = fit_minmax(d, Modality::Sequence);
  CHECK(sequence.min[0] == -1.0);
  CHECK(sequence.max[0] == 1.0);
  CHECK(sequence.dim() != image.dim());  // fitted independently

  Dataset empty;
  CHECK_THROWS_AS(fit_minmax(empty, Modality::Image), std::invalid_argument);
}

TEST_CASE("apply_minmax rescales, zeroes constant dimensions and clamps") {
  ScaleParams p;
  p.min = VectorXr::Constant(3, 2.0);
  p.max = VectorXr::Constant(3, 6.0);
  VectorXr x(3);
  x << 2.0, 4.0, 6.0;
  VectorXr y = apply_minmax(p, x);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == doctest::Approx(0.5));
  CHECK(y[2] == 1.0);

  ScaleParams constant;
  constant.min = VectorXr::Constant(1, 5.0);
  constant.max = VectorXr::Constant(1, 5.0);
  CHECK(apply_minmax(constant, VectorXr(VectorXr::Constant(1, 123.0)))[0] == 0.0);

  VectorXr out_of_range(3);
  out_of_range << 8.0, 1.0, 3.0;
  VectorXr clamped = apply_minmax(p, out_of_range);
  CHECK(clamped[0] == 1.0);
  CHECK(clamped[1] == 0.0);

  VectorXr wrong(2);
  CHECK_THROWS_AS(apply_minmax(p, wrong), DimensionError);
}

TEST_CASE("apply_minmax maps every training vector into [0, 1]") {
  SynthConfig cfg;
  cfg.classes = 3;
  cfg.cases_per_class = 10;
  cfg.image_dim = 16;
  cfg.sequence_dim = 16;
  cfg.noise = 1.0;
  cfg.seed = 4;
  Dataset d = synth_generate(cfg);
  ScaleParams p = fit_minmax(d, Modality::Image);
  for (const auto& c : d.cases) {
    VectorXr y = apply_minmax(p, c.f);
    CHECK(y.minCoeff() >= 0.0);
    CHECK(y.maxCoeff() <= 1.0);
  }
}

TEST_CASE("scale params survive a save/load round trip") {
  ScaleParams image;
  image.min = VectorXr::Constant(2, -0.125);
  image.max = VectorXr::Constant(2, 3.75);
  ScaleParams sequence;
  sequence.min = VectorXr::Constant(3, 0.1);
  sequence.max = VectorXr::Constant(3, 0.1);  // constant dims allowed

  TempFile file("mblx_scale.json");
  save_scale_params(file.str(), image, sequence);
  auto [li, ls] = load_scale_params(file.str());
  CHECK(li.min == image.min);
  CHECK(li.max == image.max);
  CHECK(ls.min == sequence.min);
  CHECK(ls.is_constant(0));
}

TEST_CASE("make_folds stratifies two balanced classes exactly") {
  Dataset d = two_class_dataset(5, 5);
  FoldAssignment folds = make_folds(d, 5, 7);
  for (int f = 0; f < 5; ++f) {
    auto test = folds.test_indices(d, f);
    REQUIRE(test.size() == 2);
    std::set<std::string> labels;
    for (auto i : test) labels.insert(d.cases[i].label);
    CHECK(labels == std::set<std::string>{"A", "B"});
  }
}

TEST_CASE("make_folds is deterministic per seed") {
  Dataset d = two_class_dataset(13, 9);
  FoldAssignment a = make_folds(d, 4, 123);
  FoldAssignment b = make_folds(d, 4, 123);
  CHECK(a.fold_of == b.fold_of);
}

TEST_CASE("make_folds balances lung-sized class counts within one case") {
  // 535 + 510 cases, k = 5: every fold should hold 209 +- 1 cases.
  Dataset d = two_class_dataset(535, 510);
  FoldAssignment folds = make_folds(d, 5, 2024);
  std::map<int, int> sizes;
  for (const auto& [id, f] : folds.fold_of) sizes[f]++;
  REQUIRE(sizes.size() == 5);
  for (const auto& [f, n] : sizes) {
    CHECK(n >= 208);
    CHECK(n <= 210);
  }
}

TEST_CASE("make_folds partitions the dataset") {
  Dataset d = two_class_dataset(11, 6);
  FoldAssignment folds = make_folds(d, 3, 5);
  std::set<std::string> seen;
  for (int f = 0; f < 3; ++f) {
    auto test = folds.test_indices(d, f);
    CHECK_FALSE(test.empty());
    for (auto i : test) CHECK(seen.insert(d.cases[i].case_id).second);  // disjoint
    auto train = folds.train_indices(d, f);
    CHECK(train.size() + test.size() == d.size());
  }
  CHECK(seen.size() == d.size());  // union covers everything
}

TEST_CASE("make_folds rejects bad fold counts and warns on relaxed stratification") {
  Dataset d = two_class_dataset(2, 1);
  CHECK_THROWS_AS(make_folds(d, 1, 0), ConfigError);
  CHECK_THROWS_AS(make_folds(d, 4, 0), ConfigError);  // k > dataset size

  WarningCapture warnings;
  make_folds(d, 2, 0);  // class B has a single member
  CHECK(warnings.contains("stratification relaxed"));
}

TEST_CASE("synth_generate is bit-deterministic per seed") {
  SynthConfig cfg;
  cfg.classes = 2;
  cfg.cases_per_class = 4;
  cfg.image_dim = 8;
  cfg.sequence_dim = 6;
  cfg.seed = 31337;
  Dataset a = synth_generate(cfg);
  Dataset b = synth_generate(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.cases[i].f == b.cases[i].f);
    CHECK(a.cases[i].g == b.cases[i].g);
  }
}

TEST_CASE("synth_generate: strong signal separates classes in cosine similarity") {
  SynthConfig cfg;
  cfg.classes = 2;
  cfg.cases_per_class = 100;
  cfg.image_dim = 64;
  cfg.sequence_dim = 64;
  cfg.signal_image = 1.0;
  cfg.signal_sequence = 1.0;
  cfg.noise = 0.05;
  cfg.seed = 1;
  Dataset d = synth_generate(cfg);

  std::vector<const VectorXr*> class0, class1;
  for (const auto& c : d.cases) {
    (c.label == "class_0" ? class0 : class1).push_back(&c.f);
  }
  const double within =
      0.5 * (mean_pairwise_cosine(class0, class0) + mean_pairwise_cosine(class1, class1));
  const double between = mean_pairwise_cosine(class0, class1);
  CHECK(within > between);
  CHECK(within > 0.9);  // noise 0.05 barely perturbs the prototype direction
}

TEST_CASE("synth_generate: zero signal leaves class means indistinguishable") {
  SynthConfig cfg;
  cfg.classes = 2;
  cfg.cases_per_class = 200;
  cfg.image_dim = 32;
  cfg.sequence_dim = 32;
  cfg.signal_image = 0.0;
  cfg.signal_sequence = 0.0;
  cfg.noise = 1.0;
  cfg.seed = 8;
  Dataset d = synth_generate(cfg);

  VectorXr mean0 = VectorXr::Zero(32), mean1 = VectorXr::Zero(32);
  int n0 = 0, n1 = 0;
  for (const auto& c : d.cases) {
    if (c.label == "class_0") {
      mean0 += c.f;
      ++n0;
    } else {
      mean1 += c.f;
      ++n1;
    }
  }
  mean0 /= n0;
  mean1 /= n1;
  // Per-dimension two-sample z statistic with unit noise: |z| stays small.
  const double se = std::sqrt(1.0 / n0 + 1.0 / n1);
  CHECK(((mean0 - mean1) / se).cwiseAbs().maxCoeff() < 5.0);
}

TEST_CASE("synth_generate validates its configuration") {
  SynthConfig cfg;
  cfg.classes = 1;
  CHECK_THROWS_AS(synth_generate(cfg), ConfigError);
  cfg.classes = 2;
  cfg.signal_image = 1.5;
  CHECK_THROWS_AS(synth_generate(cfg), ConfigError);
  cfg.signal_image = 1.0;
  cfg.cases_per_class = 1;
  CHECK_THROWS_AS(synth_generate(cfg), ConfigError);
}
