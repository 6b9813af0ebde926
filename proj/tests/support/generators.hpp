#pragma once

#include <algorithm>
#include <set>

#include "ogl/model.hpp"

namespace ogl::testing {

/// Random covering collection with 2..max_p predictors and 1..max_groups
/// distinct groups.
inline GroupCollection random_groups(Rng& rng, Index max_p, Index max_groups) {
  std::uniform_int_distribution<Index> pick_p(2, max_p);
  std::uniform_int_distribution<Index> pick_m(1, max_groups);
  std::bernoulli_distribution coin(0.45);
  while (true) {
    const Index p = pick_p(rng);
    const Index m = pick_m(rng);
    std::set<IndexSet> distinct;
    for (Index g = 0; g < m; ++g) {
      IndexSet s;
      for (Index i = 0; i < p; ++i)
        if (coin(rng)) s.push_back(i);
      if (s.empty()) s.push_back(std::uniform_int_distribution<Index>(0, p - 1)(rng));
      distinct.insert(s);
    }
    std::vector<IndexSet> groups(distinct.begin(), distinct.end());
    std::vector<bool> covered(static_cast<std::size_t>(p), false);
    for (const auto& g : groups)
      for (Index i : g) covered[static_cast<std::size_t>(i)] = true;
    // Uncovered predictors are appended to the last group.
    IndexSet& last = groups.back();
    for (Index i = 0; i < p; ++i)
      if (!covered[static_cast<std::size_t>(i)]) last.push_back(i);
    std::sort(last.begin(), last.end());
    std::set<IndexSet> check(groups.begin(), groups.end());
    if (check.size() != groups.size()) continue;
    std::shuffle(groups.begin(), groups.end(), rng);
    return GroupCollection(std::move(groups), p);
  }
}

/// Gaussian vector with roughly a third of its entries set to zero, never
/// entirely zero.
inline Vector random_sparse_vector(Rng& rng, Index p) {
  std::bernoulli_distribution zero(0.3);
  Vector v = standard_normal(p, rng);
  for (Index i = 0; i < p; ++i)
    if (zero(rng)) v[i] = 0.0;
  if (v.isZero(0.0)) v[0] = 1.0;
  return v;
}

/// Number of free split coordinates of the duplicated representation.
inline Index free_split_dims(const GroupCollection& groups) {
  Index d = 0;
  for (Index i = 0; i < groups.p(); ++i) d += groups.membership(i) - 1;
  return d;
}

}  // namespace ogl::testing
