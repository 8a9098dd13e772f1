#include "wozlab/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "wozlab/error.hpp"
#include "wozlab/utf8.hpp"

namespace wozlab {

std::size_t lcs_length(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (char32_t ca : a) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = ca == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double lcsseq_similarity(std::string_view a, std::string_view b) {
  const auto ua = utf8::decode(a);
  const auto ub = utf8::decode(b);
  if (ua.empty() && ub.empty()) return 1.0;
  if (ua.empty() || ub.empty()) return 0.0;
  if (ua == ub) return 1.0;
  const auto longest = std::max(ua.size(), ub.size());
  return static_cast<double>(lcs_length(ua, ub)) / static_cast<double>(longest);
}

namespace {

template <class T>
double cosine(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size())
    throw ValidationError("cosine similarity of vectors with dimensions " +
                          std::to_string(u.size()) + " and " + std::to_string(v.size()));
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * v[i];
    nu += static_cast<double>(u[i]) * u[i];
    nv += static_cast<double>(v[i]) * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw UndefinedMetricError("cosine similarity of a zero-norm vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

}  // namespace

double cosine_similarity(std::span<const float> u, std::span<const float> v) {
  return cosine(u, v);
}
double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  return cosine(u, v);
}

}  // namespace wozlab
