#pragma once

// Independent references for the statistics code: 50-digit tail
// probabilities and textbook sums of squares.

#include <cmath>
#include <utility>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace testing {

using Hp = boost::multiprecision::cpp_bin_float_50;

inline double hp_t_two_sided(double t, double df) {
  boost::math::students_t_distribution<Hp> d{Hp(df)};
  return static_cast<double>(2 * cdf(complement(d, abs(Hp(t)))));
}

inline double hp_f_upper(double f, double d1, double d2) {
  boost::math::fisher_f_distribution<Hp> d{Hp(d1), Hp(d2)};
  return static_cast<double>(cdf(complement(d, Hp(f))));
}

struct BruteWelch {
  double t, df, p;
};

inline BruteWelch brute_welch(const std::vector<double>& x, const std::vector<double>& y) {
  auto moments = [](const std::vector<double>& v) {
    long double s = 0;
    for (double e : v) s += e;
    const long double m = s / v.size();
    long double ss = 0;
    for (double e : v) ss += (e - m) * (e - m);
    return std::pair<long double, long double>{m, ss / (v.size() - 1)};
  };
  const auto [mx, vx] = moments(x);
  const auto [my, vy] = moments(y);
  const long double a = vx / x.size(), b = vy / y.size();
  const long double t = (mx - my) / std::sqrt(a + b);
  const long double df = (a + b) * (a + b) / (a * a / (x.size() - 1) + b * b / (y.size() - 1));
  const double td = static_cast<double>(t), dfd = static_cast<double>(df);
  return {td, dfd, hp_t_two_sided(td, dfd)};
}

struct BruteF {
  double f, d1, d2, p;
};

// Between/within sums of squares for a one-way layout.
inline BruteF brute_oneway(const std::vector<std::vector<double>>& groups) {
  long double total = 0;
  std::size_t n = 0;
  for (const auto& g : groups)
    for (double v : g) {
      total += v;
      ++n;
    }
  const long double grand = total / n;
  long double ssb = 0, ssw = 0;
  for (const auto& g : groups) {
    long double s = 0;
    for (double v : g) s += v;
    const long double m = s / g.size();
    ssb += g.size() * (m - grand) * (m - grand);
    for (double v : g) ssw += (v - m) * (v - m);
  }
  const double d1 = static_cast<double>(groups.size() - 1);
  const double d2 = static_cast<double>(n - groups.size());
  const double f = static_cast<double>((ssb / d1) / (ssw / d2));
  return {f, d1, d2, hp_f_upper(f, d1, d2)};
}

}  // namespace testing
