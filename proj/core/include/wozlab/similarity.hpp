#pragma once

#include <span>
#include <string_view>

namespace wozlab {

/// Length of the longest common subsequence of the two code point
/// sequences.
std::size_t lcs_length(std::u32string_view a, std::u32string_view b);

/// LCS length over max length, on raw code points (case and whitespace
/// kept). 1 when both are empty, 0 when exactly one is.
double lcsseq_similarity(std::string_view a, std::string_view b);

/// dot(u, v) / (|u| |v|). Throws ValidationError on a dimension mismatch
/// and UndefinedMetricError on a zero-norm input.
double cosine_similarity(std::span<const float> u, std::span<const float> v);
double cosine_similarity(std::span<const double> u, std::span<const double> v);

}  // namespace wozlab
