#pragma once

// Finite-difference Jacobian of the one-period map on the flattened state
// (x_{t-1}, ..., x_{t-k}, m_t, z_{1,t-1}, z_{2,t-1}).

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "ared/clearing.hpp"
#include "ared/linear_algebra.hpp"

namespace ared {

/// Flattening requires a full window so that the coordinate count is fixed.
inline Eigen::VectorXd flatten(const MarketState& st) {
  const auto k = st.deviations.limit();
  if (st.deviations.size() != k) throw DomainError("flatten: deviation window is not full");
  Eigen::VectorXd v(static_cast<Eigen::Index>(k + 3));
  for (std::size_t i = 0; i < k; ++i) v(static_cast<Eigen::Index>(i)) = st.deviations[i];
  v(static_cast<Eigen::Index>(k)) = st.m;
  v(static_cast<Eigen::Index>(k + 1)) = st.z_prev[0];
  v(static_cast<Eigen::Index>(k + 2)) = st.z_prev[1];
  return v;
}

/// Inverse of `flatten`, keeping the window limit and period of `like`.
inline MarketState unflatten(const Eigen::VectorXd& v, const MarketState& like) {
  MarketState st = like;
  const auto k = like.deviations.limit();
  for (std::size_t i = 0; i < k; ++i) st.deviations[i] = v(static_cast<Eigen::Index>(i));
  st.m = v(static_cast<Eigen::Index>(k));
  st.z_prev = {v(static_cast<Eigen::Index>(k + 1)), v(static_cast<Eigen::Index>(k + 2))};
  return st;
}

inline Eigen::MatrixXd finite_difference_jacobian(const MarketState& at,
                                                  const PredictorPair& predictors,
                                                  const MarketParams& p, Mode mode,
                                                  double h = 1e-7) {
  const Eigen::VectorXd base = flatten(at);
  const auto n = base.size();
  Eigen::MatrixXd jac(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd up = base, down = base;
    up(j) += h;
    down(j) -= h;
    const Eigen::VectorXd fu = flatten(step(unflatten(up, at), predictors, p, mode).next);
    const Eigen::VectorXd fd = flatten(step(unflatten(down, at), predictors, p, mode).next);
    jac.col(j) = (fu - fd) / (2.0 * h);
  }
  return jac;
}

inline std::vector<Complex> numeric_eigenvalues(const MarketState& at,
                                                const PredictorPair& predictors,
                                                const MarketParams& p, Mode mode,
                                                double h = 1e-7) {
  return eigenvalues(finite_difference_jacobian(at, predictors, p, mode, h));
}

}  // namespace ared
