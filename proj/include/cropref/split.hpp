#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cropref::split {

// Stratified random partition of item indices. Each class's share of every
// split stays within one item of ratio * class size, and split totals track
// ratio * N as closely as that allows. Every ratio must be positive and the
// ratios must sum to 1. A class with fewer items than there are splits
// cannot be stratified. Output index lists are sorted.
std::vector<std::vector<std::size_t>> stratified_split(std::span<const int> labels,
                                                       std::span<const double> ratios,
                                                       std::uint64_t seed);

}  // namespace cropref::split
