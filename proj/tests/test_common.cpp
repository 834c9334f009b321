#include "doctest.h"
#include "opme/common.hpp"
#include "support.hpp"

using namespace opme;

TEST_CASE("rng copies replay the same stream") {
  Rng a(42);
  for (int i = 0; i < 5; ++i) a.next_u64();
  Rng checkpoint = a;
  std::vector<std::uint64_t> first, second;
  for (int i = 0; i < 100; ++i) first.push_back(a.next_u64());
  for (int i = 0; i < 100; ++i) second.push_back(checkpoint.next_u64());
  CHECK(first == second);
  CHECK(a == checkpoint);
}

TEST_CASE("rng output follows the counter-based definition") {
  // Independent restatement: key = finalize(seed + gamma), draw i =
  // finalize(key + (i + 1) gamma), with the SplitMix64 finalizer.
  auto finalize = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  constexpr std::uint64_t gamma = 0x9E3779B97F4A7C15ULL;
  CHECK(finalize(gamma) == 0xE220A8397B1DCDAFULL);  // published first SplitMix64 output for seed 0
  const std::uint64_t seed = 1234;
  const std::uint64_t key = finalize(seed + gamma);
  Rng rng(seed);
  for (std::uint64_t i = 0; i < 10; ++i) CHECK(rng.next_u64() == finalize(key + (i + 1) * gamma));
  Rng skipped(seed, 5);
  CHECK(skipped.next_u64() == finalize(key + 6 * gamma));
}

TEST_CASE("forked streams differ and do not advance the parent") {
  Rng parent(7);
  const Rng before = parent;
  Rng a = parent.fork(1), b = parent.fork(2);
  CHECK(parent == before);
  int equal = 0;
  for (int i = 0; i < 64; ++i) equal += a.next_u64() == b.next_u64();
  CHECK(equal == 0);
}

TEST_CASE("uniform and normal draws have the right moments") {
  Rng rng(3);
  const int N = 200000;
  std::vector<double> u, g;
  for (int i = 0; i < N; ++i) {
    const double x = rng.uniform();
    CHECK_MESSAGE((x >= 0.0 && x < 1.0), "uniform out of range");
    u.push_back(x);
  }
  for (int i = 0; i < N; ++i) g.push_back(rng.normal());
  const auto mu = testing::mean_std(u), mg = testing::mean_std(g);
  CHECK(std::abs(mu.mean - 0.5) < 4 * mu.sd / std::sqrt(N));
  CHECK(std::abs(mg.mean) < 4 * mg.sd / std::sqrt(N));
  CHECK(mg.sd == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("normal consumes exactly two draws, categorical one") {
  Rng a(11), b(11);
  a.normal();
  b.next_u64();
  b.next_u64();
  CHECK(a == b);
  const std::vector<double> p{0.2, 0.3, 0.5};
  a.categorical(p);
  b.next_u64();
  CHECK(a == b);
}

TEST_CASE("categorical frequencies match the probabilities") {
  Rng rng(5);
  const std::vector<double> p{0.1, 0.0, 0.6, 0.3};
  std::vector<int> counts(4, 0);
  const int N = 100000;
  for (int i = 0; i < N; ++i) counts[static_cast<std::size_t>(rng.categorical(p))]++;
  CHECK(counts[1] == 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double f = counts[i] / static_cast<double>(N);
    CHECK(std::abs(f - p[i]) <= 4 * std::sqrt(p[i] * (1 - p[i]) / N) + 1e-12);
  }
}

TEST_CASE("tensor indexing is row-major") {
  Tensor t({2, 3, 4});
  double v = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 4; ++k) t(i, j, k) = v++;
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t.values()[i] == static_cast<double>(i));
  auto row = t.slice({1, 2});
  REQUIRE(row.size() == 4);
  CHECK(row[0] == 20.0);
  CHECK(t.slice({1}).size() == 12);
  CHECK(t.max() == 23.0);
  CHECK(t.min() == 0.0);
}

TEST_CASE("tensor construction checks the value count") {
  CHECK_THROWS(Tensor({2, 2}, std::vector<double>{1.0, 2.0, 3.0}));
}

TEST_CASE("distribution and index checks") {
  const std::vector<double> ok{0.25, 0.75}, bad{0.5, 0.6}, neg{1.2, -0.2};
  CHECK(is_distribution(ok));
  CHECK_FALSE(is_distribution(bad));
  CHECK_FALSE(is_distribution(neg));
  CHECK_NOTHROW(check_index(2, 3, "s"));
  CHECK_THROWS_AS(check_index(3, 3, "s"), InvalidIndex);
  CHECK_THROWS_AS(check_index(-1, 3, "s"), InvalidIndex);
}

TEST_CASE("validation errors carry every violation") {
  const ValidationError e({"a broken", "b broken"});
  CHECK(e.violations().size() == 2);
  CHECK(std::string(e.what()).find("b broken") != std::string::npos);
}
