#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace opme {

// Error hierarchy. Every failure surfaced by the library derives from Error so
// the CLI can map it to an exit status in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidIndex : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class RealizabilityError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

inline constexpr double kProbabilityTolerance = 1e-9;

/// Counter-based generator: output i is a SplitMix64 finalizer applied to
/// key + i * gamma. The whole state is (key, counter), so a copy is a
/// checkpoint and replaying a copy reproduces the stream bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t counter = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal();
  /// Inverse-CDF draw; consumes exactly one draw.
  int categorical(std::span<const double> probs);

  /// Derives an independent stream; does not advance this generator.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t z);

/// Dense row-major array of doubles with a runtime shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(std::vector<int> shape, std::vector<double> values);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  template <typename... I>
  double& operator()(I... idx) {
    return data_[offset({static_cast<int>(idx)...})];
  }
  template <typename... I>
  double operator()(I... idx) const {
    return data_[offset({static_cast<int>(idx)...})];
  }

  /// Contiguous trailing block addressed by a prefix of indices.
  std::span<double> slice(std::initializer_list<int> prefix);
  std::span<const double> slice(std::initializer_list<int> prefix) const;

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double min() const;
  double max() const;
  double max_abs() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t offset(std::initializer_list<int> idx) const {
    assert(idx.size() == shape_.size());
    std::size_t off = 0;
    std::size_t k = 0;
    for (int i : idx) {
      assert(i >= 0 && i < shape_[k]);
      off = off * static_cast<std::size_t>(shape_[k]) + static_cast<std::size_t>(i);
      ++k;
    }
    return off;
  }
  std::size_t prefix_offset(std::initializer_list<int> prefix, std::size_t& block) const;

  std::vector<int> shape_;
  std::vector<double> data_;
};

bool is_distribution(std::span<const double> p, double tol = kProbabilityTolerance);

/// Throws InvalidIndex naming `what` unless 0 <= value < bound.
void check_index(int value, int bound, const char* what);

}  // namespace opme
