#include <doctest.h>

#include <cmath>

#include "ogl/overlap_norm.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace ogl;
using ogl::testing::overlap_norm_oracle;

namespace {

const GroupCollection kChain({{0, 1}, {1, 2}}, 3);

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

GroupCollection nested_groups() { return GroupCollection::from_one_based({{1, 2}, {3, 4}, {1, 2, 3, 4}, {5}}, 5); }

}  // namespace

TEST_CASE("closed-form chain example: value sqrt(5) with an even split") {
  const auto r = overlap_norm(vec({1, 1, 1}), kChain);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(std::sqrt(5.0)).epsilon(1e-9));
  CHECK(r.dual_bound <= r.value);
  const auto& v = r.decomposition.parts;
  CHECK(v[0][1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(v[1][1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK((r.decomposition.sum(3) - vec({1, 1, 1})).norm() <= 1e-12);
}

TEST_CASE("grid search over the split reproduces sqrt(5)") {
  // min_a sqrt(1 + a^2) + sqrt((1 - a)^2 + 1) at 1e-5 resolution.
  double best = 1e300;
  for (int k = 0; k <= 100000; ++k) {
    const double a = k * 1e-5;
    best = std::min(best, std::sqrt(1 + a * a) + std::sqrt((1 - a) * (1 - a) + 1));
  }
  CHECK(best == doctest::Approx(std::sqrt(5.0)).epsilon(1e-9));
  CHECK(overlap_norm_oracle(vec({1, 1, 1}), kChain, 100001) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-6));
}

TEST_CASE("decoupled and singleton cases") {
  CHECK(overlap_norm(vec({3, 0, 4}), kChain).value == doctest::Approx(7.0).epsilon(1e-9));
  const auto singles = GroupCollection::singletons(3);
  CHECK(overlap_norm(vec({1, -2, 3}), singles).value == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(overlap_norm(Vector::Zero(3), kChain).value == 0.0);
  CHECK(overlap_norm_oracle(Vector::Zero(3), kChain, 11) == 0.0);
}

TEST_CASE("disjoint groups reduce to the sum of restricted norms") {
  auto groups = make_contiguous_groups(12, 4, 1);
  Rng rng = make_rng(5);
  for (int t = 0; t < 20; ++t) {
    const Vector b = standard_normal(12, rng);
    double expected = 0.0;
    for (Index g = 0; g < groups.size(); ++g) expected += groups.restrict(b, g).norm();
    const auto r = overlap_norm(b, groups);
    CHECK(std::abs(r.value - expected) <= 1e-10);
    CHECK(overlap_norm_oracle(b, groups, 5) == doctest::Approx(expected).epsilon(1e-12));
    for (Index g = 0; g < groups.size(); ++g) {
      CHECK((groups.restrict(r.decomposition.parts[static_cast<std::size_t>(g)], g) - groups.restrict(b, g)).norm() <=
            1e-10);
    }
  }
}

TEST_CASE("random instances agree with the brute-force oracle") {
  Rng rng = make_rng(2024);
  int checked = 0;
  while (checked < 40) {
    auto groups = testing::random_groups(rng, 6, 4);
    if (testing::free_split_dims(groups) > 6) continue;
    const Vector b = testing::random_sparse_vector(rng, groups.p());
    const auto r = overlap_norm(b, groups);
    const double oracle = overlap_norm_oracle(b, groups, 11);
    CHECK(r.converged);
    CHECK(std::abs(r.value - oracle) <= 1e-4);
    ++checked;
  }
}

TEST_CASE("norm axioms and sandwich bounds") {
  Rng rng = make_rng(77);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int t = 0; t < 50; ++t) {
    auto groups = testing::random_groups(rng, 8, 6);
    const Index p = groups.p();
    const Vector b1 = standard_normal(p, rng);
    const Vector b2 = testing::random_sparse_vector(rng, p);
    const double c = u(rng);
    const double n1 = overlap_norm(b1, groups).value;
    const double n2 = overlap_norm(b2, groups).value;
    CHECK(std::abs(overlap_norm(c * b1, groups).value - std::abs(c) * n1) <= 1e-6 * (1 + n1));
    CHECK(overlap_norm(b1 + b2, groups).value <= n1 + n2 + 1e-6);
    CHECK(b1.norm() <= n1 + 1e-9);
    CHECK(n1 <= b1.lpNorm<1>() * std::sqrt(static_cast<double>(groups.max_group_size())) + 1e-9);
    CHECK(n1 > 0.0);
  }
}

TEST_CASE("structured sparsity on the chain example") {
  auto full = structured_sparsity(vec({0.7, -1.3, 2.1}), kChain);
  CHECK(full.minimal == 2);
  CHECK(full.count == 2);

  auto one = structured_sparsity(vec({0.7, -1.3, 0.0}), kChain);
  CHECK(one.minimal == 1);
  CHECK(one.count == 1);
  CHECK(one.active == IndexSet{0});

  auto zero = structured_sparsity(Vector::Zero(3), kChain);
  CHECK(zero.minimal == 0);
  CHECK(zero.active.empty());
}

TEST_CASE("structured sparsity prunes a redundant nested group") {
  const auto groups = nested_groups();
  NormOptions opts;
  opts.start = std::vector<double>{1.0, 1.0, 1.0, 1.0};
  auto s = structured_sparsity(vec({2, 2, 0, 0, 3}), groups, opts);
  CHECK(s.count == 3);
  CHECK(s.minimal == 2);
  CHECK(s.norm.value == doctest::Approx(2.0 * std::sqrt(2.0) + 3.0).epsilon(1e-9));
}

TEST_CASE("direction uniqueness across restarts") {
  const Vector b = vec({1, 1, 1});
  NormOptions a;
  a.start = std::vector<double>{0.1, 3.0};
  NormOptions c;
  c.start = std::vector<double>{5.0, 0.2};
  const auto ra = overlap_norm(b, kChain, a);
  const auto rc = overlap_norm(b, kChain, c);
  CHECK(check_direction_uniqueness(ra.decomposition, rc.decomposition, 1e-6).all_hold);
  CHECK(check_direction_uniqueness(ra.decomposition, ra.decomposition, 1e-12).all_hold);
}

TEST_CASE("nested groups: mass splits differ but directions agree") {
  const auto groups = nested_groups();
  const Vector b = vec({1.5, 1.5, 0, 0, -2});
  NormOptions a;
  a.start = std::vector<double>{1.0, 0.5, 0.1, 1.0};
  NormOptions c;
  c.start = std::vector<double>{0.1, 0.5, 1.0, 1.0};
  const auto ra = overlap_norm(b, groups, a);
  const auto rc = overlap_norm(b, groups, c);
  CHECK(ra.converged);
  CHECK(rc.converged);
  CHECK(ra.value == doctest::Approx(rc.value).epsilon(1e-9));
  const auto na = ra.decomposition.part_norms();
  const auto nc = rc.decomposition.part_norms();
  CHECK(std::abs(na[0] - nc[0]) > 0.1);
  CHECK(check_direction_uniqueness(ra.decomposition, rc.decomposition, 1e-6).all_hold);
}

TEST_CASE("minimizing decompositions from random restarts satisfy the direction property") {
  Rng rng = make_rng(31);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int t = 0; t < 30; ++t) {
    auto groups = testing::random_groups(rng, 7, 5);
    const Vector b = testing::random_sparse_vector(rng, groups.p());
    std::vector<double> s1(static_cast<std::size_t>(groups.size())), s2(s1.size());
    for (auto& x : s1) x = u(rng);
    for (auto& x : s2) x = u(rng);
    NormOptions o1, o2;
    o1.start = s1;
    o2.start = s2;
    const auto r1 = overlap_norm(b, groups, o1);
    const auto r2 = overlap_norm(b, groups, o2);
    CHECK(std::abs(r1.value - r2.value) <= 1e-7 * (1 + r1.value));
    CHECK(check_direction_uniqueness(r1.decomposition, r2.decomposition, 1e-3).all_hold);
  }
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(overlap_norm(vec({1, 2}), kChain), ValidationError);
  NormOptions bad;
  bad.tolerance = 0.0;
  CHECK_THROWS_AS(overlap_norm(vec({1, 2, 3}), kChain, bad), ValidationError);
  Decomposition a;
  a.parts = {vec({1, 0, 0}), vec({0, 0, 0})};
  Decomposition b;
  b.parts = {vec({2, 0, 0}), vec({0, 0, 0})};
  CHECK_THROWS_AS(check_direction_uniqueness(a, b, 1e-6), ValidationError);
}

TEST_CASE("iteration cap reports non-convergence but keeps an upper bound") {
  NormOptions opts;
  opts.max_iters = 1;
  opts.tolerance = 1e-14;
  Rng rng = make_rng(8);
  auto groups = testing::random_groups(rng, 8, 6);
  const Index p = groups.p();
  const Vector b = standard_normal(p, rng);
  const auto capped = overlap_norm(b, groups, opts);
  const auto full = overlap_norm(b, groups);
  CHECK(capped.value >= full.value - 1e-12);
  CHECK((capped.decomposition.sum(p) - b).norm() <= 1e-10);
}
