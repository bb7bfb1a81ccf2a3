#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace ared {

using Complex = std::complex<double>;

/// Eigenvalues of a real square matrix, sorted by decreasing modulus.
inline std::vector<Complex> eigenvalues(const Eigen::MatrixXd& a) {
  std::vector<Complex> out;
  if (a.rows() == 0) return out;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, /*computeEigenvectors=*/false);
  const auto& ev = solver.eigenvalues();
  out.assign(ev.data(), ev.data() + ev.size());
  std::stable_sort(out.begin(), out.end(),
                   [](Complex l, Complex r) { return std::abs(l) > std::abs(r); });
  return out;
}

/// Roots of lambda^n - c[0] lambda^(n-1) - ... - c[n-1] via the companion
/// matrix, sorted by decreasing modulus.
inline std::vector<Complex> characteristic_roots(const std::vector<double>& c) {
  const auto n = static_cast<Eigen::Index>(c.size());
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) companion(0, j) = c[static_cast<std::size_t>(j)];
  for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  return eigenvalues(companion);
}

inline double spectral_radius(const std::vector<Complex>& ev) {
  double r = 0.0;
  for (auto z : ev) r = std::max(r, std::abs(z));
  return r;
}

}  // namespace ared
