#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cropref/error.hpp"
#include "cropref/split.hpp"

using namespace cropref;

namespace {

std::vector<int> labels_with(const std::vector<int>& sizes) {
  std::vector<int> out;
  for (std::size_t c = 0; c < sizes.size(); ++c)
    for (int i = 0; i < sizes[c]; ++i) out.push_back(static_cast<int>(c));
  // interleave so that classes are not contiguous
  std::vector<int> mixed;
  for (std::size_t i = 0; i < out.size(); ++i) mixed.push_back(out[(i * 7919) % out.size()]);
  return mixed;
}

void check_partition(const std::vector<std::vector<std::size_t>>& parts, std::size_t n) {
  std::set<std::size_t> all;
  for (const auto& p : parts) {
    CHECK(std::is_sorted(p.begin(), p.end()));
    for (auto i : p) CHECK(all.insert(i).second);
  }
  CHECK(all.size() == n);
}

}  // namespace

TEST_CASE("60/20/20 on 100 items per class is exact") {
  const auto labels = labels_with({100, 100, 100});
  const std::vector<double> r{0.6, 0.2, 0.2};
  const auto parts = split::stratified_split(labels, r, 1);
  check_partition(parts, labels.size());
  for (std::size_t s = 0; s < 3; ++s) {
    std::map<int, int> per;
    for (auto i : parts[s]) ++per[labels[i]];
    for (int c = 0; c < 3; ++c) CHECK(per[c] == static_cast<int>(std::lround(r[s] * 100)));
  }
}

TEST_CASE("uneven classes stay within one item per class and split") {
  const auto labels = labels_with({7, 13, 29, 3, 51});
  const std::vector<double> r{0.6, 0.2, 0.2};
  const auto parts = split::stratified_split(labels, r, 9);
  check_partition(parts, labels.size());
  std::map<int, int> size;
  for (int l : labels) ++size[l];
  for (std::size_t s = 0; s < 3; ++s) {
    std::map<int, int> per;
    for (auto i : parts[s]) ++per[labels[i]];
    for (const auto& [c, n] : size) {
      CHECK(per[c] >= std::floor(r[s] * n));
      CHECK(per[c] <= std::ceil(r[s] * n));
    }
    CHECK(std::fabs(static_cast<double>(parts[s].size()) - r[s] * labels.size()) <= 1.0 + 1e-9);
  }
}

TEST_CASE("80/20 split is seeded") {
  const auto labels = labels_with({40, 25});
  const std::vector<double> r{0.8, 0.2};
  CHECK(split::stratified_split(labels, r, 3) == split::stratified_split(labels, r, 3));
  CHECK(split::stratified_split(labels, r, 3) != split::stratified_split(labels, r, 4));
}

TEST_CASE("split preconditions") {
  const auto labels = labels_with({10, 10});
  const std::vector<double> bad_sum{0.5, 0.4};
  const std::vector<double> zero{1.0, 0.0};
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(split::stratified_split(labels, bad_sum, 1), Error);
  CHECK_THROWS_AS(split::stratified_split(labels, zero, 1), Error);
  CHECK_THROWS_AS(split::stratified_split(labels, one, 1), Error);
  const auto tiny = labels_with({10, 2});
  const std::vector<double> three{0.6, 0.2, 0.2};
  try {
    split::stratified_split(tiny, three, 1);
    FAIL("expected Stratification");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Stratification);
  }
}
