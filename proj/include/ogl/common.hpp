#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ogl {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// 0-based, sorted, duplicate free.
using IndexSet = std::vector<Index>;

/// Input that violates a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a trustworthy answer
/// (singular system, breakdown of an iteration).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

using Rng = std::mt19937_64;

/// Reproducible stream keyed by a base seed and any number of stream ids.
/// The same (seed, ids...) always yields the same generator regardless of
/// thread scheduling.
template <class... Ids>
Rng make_rng(std::uint64_t seed, Ids... ids) {
  std::vector<std::uint32_t> words;
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  (push(static_cast<std::uint64_t>(ids)), ...);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

inline Vector standard_normal(Index n, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = z(rng);
  return v;
}

}  // namespace ogl
