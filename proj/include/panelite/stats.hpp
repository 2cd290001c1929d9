#ifndef PANELITE_STATS_HPP
#define PANELITE_STATS_HPP

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstddef>
#include <vector>

namespace panelite {

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Sample variance (n-1 denominator).
inline double sample_variance(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

struct WelchTest {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

// Welch two-sample t-test with Welch-Satterthwaite degrees of freedom.
inline WelchTest welch_t_test(double mean1, double var1, std::size_t n1,
                              double mean2, double var2, std::size_t n2) {
  WelchTest out;
  const double a = var1 / static_cast<double>(n1);
  const double b = var2 / static_cast<double>(n2);
  const double denom = a + b;
  if (denom <= 0.0 || n1 < 2 || n2 < 2) {
    // Degenerate: zero variance in both groups. Any mean difference is then
    // infinitely significant, identical means are not at all.
    out.t = (mean1 == mean2) ? 0.0 : std::numeric_limits<double>::infinity();
    out.df = static_cast<double>(n1 + n2 - 2);
    out.p_value = (mean1 == mean2) ? 1.0 : 0.0;
    return out;
  }
  out.t = (mean1 - mean2) / std::sqrt(denom);
  out.df = denom * denom /
           (a * a / static_cast<double>(n1 - 1) +
            b * b / static_cast<double>(n2 - 1));
  boost::math::students_t_distribution<double> dist(out.df);
  out.p_value = 2.0 * boost::math::cdf(dist, -std::abs(out.t));
  return out;
}

// Significance stars at the 10/5/1% levels, empty when not significant.
inline const char* significance_stars(double p_value) {
  if (p_value <= 0.01) return "***";
  if (p_value <= 0.05) return "**";
  if (p_value <= 0.10) return "*";
  return "";
}

}  // namespace panelite

#endif  // PANELITE_STATS_HPP
