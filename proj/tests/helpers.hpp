#ifndef PANELITE_TESTS_HELPERS_HPP
#define PANELITE_TESTS_HELPERS_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "panelite/panel.hpp"
#include "panelite/rng.hpp"

namespace test_helpers {

// Panel whose outcome cells carry coded values i*1000 + t*10 + k so tests can
// identify which cell a design column came from. Covariates are coded
// i*1000 + t*10 + j with an 800 offset.
inline panelite::PanelDataset coded_panel(int n, int t, int k, int r,
                                          int n_treated) {
  Eigen::MatrixXd y(n, t * k), x(n, t * r);
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> d =
      Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, t);
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    ids.push_back("u" + std::to_string(i + 1));
    for (int tt = 1; tt <= t; ++tt) {
      for (int q = 1; q <= k; ++q) {
        y(i, (tt - 1) * k + (q - 1)) = i * 1000 + tt * 10 + q;
      }
      for (int j = 1; j <= r; ++j) {
        x(i, (tt - 1) * r + (j - 1)) = 800 + i * 1000 + tt * 10 + j;
      }
      if (i < n_treated && tt == t) d(i, tt - 1) = 1;
    }
  }
  return panelite::PanelDataset(ids, t, k, r, y, x, d);
}

// Low-rank noise-free panel: Y_{i,(t,k)} = mu_i . lambda_{(t,k)} plus a
// constant effect added to treated posttreatment cells. Treatment starts
// after period t0 (default: last period only).
inline panelite::PanelDataset factor_panel(int n, int t, int k, int f,
                                           int n_treated, double effect,
                                           panelite::SplitRng& rng,
                                           Eigen::MatrixXd* mu_out = nullptr,
                                           int t0 = -1) {
  if (t0 < 0) t0 = t - 1;
  Eigen::MatrixXd mu(n, f), lambda(t * k, f);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < f; ++j) mu(i, j) = rng.next_normal();
  }
  for (int c = 0; c < t * k; ++c) {
    for (int j = 0; j < f; ++j) lambda(c, j) = rng.next_normal();
  }
  Eigen::MatrixXd y = mu * lambda.transpose();
  Eigen::MatrixXd x(n, 0);
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> d =
      Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, t);
  for (int i = 0; i < n_treated; ++i) {
    for (int tt = t0 + 1; tt <= t; ++tt) {
      d(i, tt - 1) = 1;
      for (int q = 0; q < k; ++q) y(i, (tt - 1) * k + q) += effect;
    }
  }
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("u" + std::to_string(i + 1));
  if (mu_out) *mu_out = mu;
  return panelite::PanelDataset(ids, t, k, 0, y, x, d);
}

}  // namespace test_helpers

#endif  // PANELITE_TESTS_HELPERS_HPP
