#include "cropref/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>

#include "cropref/error.hpp"

namespace cropref::split {

std::vector<std::vector<std::size_t>> stratified_split(std::span<const int> labels,
                                                       std::span<const double> ratios,
                                                       std::uint64_t seed) {
  if (ratios.size() < 2) throw Error(ErrorCode::InvalidArgument, "a split needs at least two parts");
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "split ratios must all be positive");
    sum += r;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidArgument, "split ratios must sum to 1");

  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);

  const std::size_t parts = ratios.size();
  for (const auto& [label, idx] : members)
    if (idx.size() < parts)
      throw Error(ErrorCode::Stratification,
                  "class " + std::to_string(label) + " has " + std::to_string(idx.size()) +
                      " items, fewer than the " + std::to_string(parts) + " splits");

  const double n = static_cast<double>(labels.size());
  std::vector<double> totals(parts, 0.0);
  std::vector<std::vector<std::size_t>> alloc;
  std::vector<std::vector<double>> targets;
  for (const auto& entry : members) {
    const auto& idx = entry.second;
    std::vector<std::size_t> counts(parts);
    std::vector<double> t(parts);
    for (std::size_t s = 0; s < parts; ++s) {
      t[s] = ratios[s] * static_cast<double>(idx.size());
      counts[s] = static_cast<std::size_t>(std::floor(t[s] + 1e-9));
      totals[s] += static_cast<double>(counts[s]);
    }
    alloc.push_back(std::move(counts));
    targets.push_back(std::move(t));
  }

  // Remainder units go, class by class, to the split furthest below its
  // global target among those still under ceil(target) for the class.
  std::size_t c = 0;
  for (const auto& entry : members) {
    const auto& idx = entry.second;
    auto& counts = alloc[c];
    const auto& t = targets[c];
    std::size_t used = 0;
    for (auto k : counts) used += k;
    for (; used < idx.size(); ++used) {
      std::size_t best = parts;
      for (std::size_t s = 0; s < parts; ++s) {
        if (static_cast<double>(counts[s]) >= std::ceil(t[s] - 1e-9)) continue;
        if (best == parts) {
          best = s;
          continue;
        }
        const double ds = ratios[s] * n - totals[s];
        const double db = ratios[best] * n - totals[best];
        const double fs = t[s] - std::floor(t[s]);
        const double fb = t[best] - std::floor(t[best]);
        if (ds > db + 1e-9 || (std::fabs(ds - db) <= 1e-9 && fs > fb + 1e-12)) best = s;
      }
      if (best == parts) best = 0;
      ++counts[best];
      totals[best] += 1.0;
    }
    ++c;
  }

  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> out(parts);
  c = 0;
  for (auto& entry : members) {
    auto& idx = entry.second;
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < parts; ++s)
      for (std::size_t k = 0; k < alloc[c][s]; ++k) out[s].push_back(idx[pos++]);
    ++c;
  }
  for (auto& part : out) std::sort(part.begin(), part.end());
  return out;
}

}  // namespace cropref::split
