#include "opme/common.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>

namespace opme {

namespace {

std::string join_violations(const std::vector<std::string>& v) {
  std::ostringstream out;
  out << "validation failed";
  for (const auto& s : v) out << "; " << s;
  return out.str();
}

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : Error(join_violations(violations)), violations_(std::move(violations)) {}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t counter) : key_(mix64(seed + kGamma)), counter_(counter) {}

std::uint64_t Rng::next_u64() {
  const std::uint64_t c = counter_++;
  return mix64(key_ + (c + 1) * kGamma);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::categorical(std::span<const double> probs) {
  const double u = uniform();
  double cum = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cum += probs[i];
    last_positive = static_cast<int>(i);
    if (u < cum) return last_positive;
  }
  // Rounding left u above the accumulated mass.
  return last_positive;
}

Rng Rng::fork(std::uint64_t stream) const {
  Rng child(0, 0);
  child.key_ = mix64(key_ ^ mix64(stream * kGamma + 0x632BE59BD9B4E019ULL));
  return child;
}

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (int d : shape_) {
    if (d < 0) throw ConfigError("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  data_.assign(n, fill);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) : Tensor(std::move(shape)) {
  if (values.size() != data_.size()) {
    std::ostringstream msg;
    msg << "tensor expects " << data_.size() << " values, got " << values.size();
    throw ConfigError(msg.str());
  }
  data_ = std::move(values);
}

std::size_t Tensor::prefix_offset(std::initializer_list<int> prefix, std::size_t& block) const {
  assert(prefix.size() <= shape_.size());
  std::size_t off = 0;
  std::size_t k = 0;
  for (int i : prefix) {
    assert(i >= 0 && i < shape_[k]);
    off = off * static_cast<std::size_t>(shape_[k]) + static_cast<std::size_t>(i);
    ++k;
  }
  block = 1;
  for (std::size_t j = k; j < shape_.size(); ++j) block *= static_cast<std::size_t>(shape_[j]);
  return off * block;
}

std::span<double> Tensor::slice(std::initializer_list<int> prefix) {
  std::size_t block = 0;
  const std::size_t off = prefix_offset(prefix, block);
  return std::span<double>(data_).subspan(off, block);
}

std::span<const double> Tensor::slice(std::initializer_list<int> prefix) const {
  std::size_t block = 0;
  const std::size_t off = prefix_offset(prefix, block);
  return std::span<const double>(data_).subspan(off, block);
}

double Tensor::min() const { return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end()); }
double Tensor::max() const { return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end()); }
double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool is_distribution(std::span<const double> p, double tol) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

void check_index(int value, int bound, const char* what) {
  if (value < 0 || value >= bound) {
    std::ostringstream msg;
    msg << what << " index " << value << " out of range [0, " << bound << ")";
    throw InvalidIndex(msg.str());
  }
}

}  // namespace opme
