#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace marblix {

inline constexpr const char* kVersion = "1.0.0";

// Default scalar of the pipeline. Core types are templated on their scalar;
// everything the CLI touches is instantiated with Real.
using Real = double;

template <typename Scalar>
using VectorX = Eigen::Vector<Scalar, Eigen::Dynamic>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXr = VectorX<Real>;
using MatrixXr = MatrixX<Real>;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto exit codes (usage 1, config 2, data 3,
// training 4).
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : Error {
  using Error::Error;
};

// Malformed content in a data file; messages carry the line number.
struct ParseError : Error {
  using Error::Error;
};

// Structurally valid file whose declared/actual dimensions disagree.
struct SchemaError : Error {
  using Error::Error;
};

// Duplicate ids, conflicting labels, partial records where forbidden.
struct IngestError : Error {
  using Error::Error;
};

// Shape or argument violations in numeric code.
struct DimensionError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Divergence and other unrecoverable optimization failures.
struct TrainingError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Logging. Verbosity comes from the MARBLIX_LOG environment variable
// (debug|info|warn|error). The sink is swappable so tests can capture
// warnings.
// ---------------------------------------------------------------------------

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };

using LogSink = std::function<void(LogLevel, const std::string&)>;

LogLevel log_level();
void set_log_level(LogLevel level);
void set_log_sink(LogSink sink);  // empty sink restores the stderr default
void log_message(LogLevel level, const std::string& msg);

inline void log_debug(const std::string& msg) { log_message(LogLevel::Debug, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::Info, msg); }
inline void log_warn(const std::string& msg) { log_message(LogLevel::Warn, msg); }
inline void log_error(const std::string& msg) { log_message(LogLevel::Error, msg); }

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// derived draws (uniform, normal, shuffle) are implemented here because the
// std::*_distribution algorithms are implementation-defined and would break
// byte-reproducibility of seeded datasets across standard libraries.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return state_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double u01() { return static_cast<double>(state_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Standard normal via Box-Muller.
  double normal() {
    double u1 = 1.0 - u01();  // (0, 1]
    double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = state_();
    } while (x >= limit);
    return x % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 state_;
};

// Shortest decimal form that round-trips the exact double (std::to_chars).
std::string format_real(double v);

// Derives independent stream seeds for sub-tasks (per fold, per model).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t x = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

}  // namespace marblix
