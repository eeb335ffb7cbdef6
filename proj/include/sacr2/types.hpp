#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sacr2 {

using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Vector2 = Eigen::Vector2d;
using MatrixRef = Eigen::Ref<const Matrix>;
using VectorRef = Eigen::Ref<const Vector>;

/// Thrown when a caller breaks an operation's precondition.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

/// Thrown when a training step produces non-finite losses.
struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown on malformed or incompatible files (demos, configs, checkpoints).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic counter-based random stream (splitmix64). All randomness in
/// the project flows through explicitly seeded instances of this class, so a
/// (seed, config) pair fully determines every run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Decorrelated substream of a master seed. Streams with distinct ids do
  /// not overlap in practice (states separated by a mixed 64-bit hash).
  static Rng stream(std::uint64_t master_seed, std::uint64_t stream_id) {
    std::uint64_t s = mix(master_seed ^ mix(stream_id + 0xd1342543de82ef95ULL));
    return Rng(s);
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  Scalar uniform() { return Scalar(next_u64() >> 11) * 0x1.0p-53; }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  int uniform_int(int n) {
    if (n <= 0) throw ContractViolation("Rng::uniform_int: n must be positive");
    const std::uint64_t un = std::uint64_t(n);
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x = next_u64();
    while (x >= bound) x = next_u64();
    return int(x % un);
  }

  /// Standard normal via Box-Muller (one value per pair of uniforms).
  Scalar normal() {
    Scalar u1 = Scalar(1.0) - uniform();  // (0, 1]
    Scalar u2 = uniform();
    return std::sqrt(Scalar(-2.0) * std::log(u1)) *
           std::cos(Scalar(2.0) * std::numbers::pi_v<Scalar> * u2);
  }

  Vector normal_vector(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Matrix normal_matrix(int rows, int cols) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = normal();
    return m;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(Scalar v);

}  // namespace sacr2
