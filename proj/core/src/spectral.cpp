#include "sleepdyn/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace sleepdyn {

void canonicalize_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index imax = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&imax);
    if (vectors(imax, c) < 0.0) vectors.col(c) = -vectors.col(c);
  }
}

EigenPairs dense_symmetric_eigs(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw EigenFailure("dense symmetric eigensolver did not converge");
  }
  const Eigen::Index n = sym.rows();
  EigenPairs out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = solver.eigenvalues()[n - 1 - i];
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  return out;
}

EigenPairs lanczos_largest(const SymmetricOperator& op, int k, std::uint64_t seed,
                           double tol, int max_basis) {
  const Eigen::Index n = op.n;
  if (k <= 0 || k > n) throw EigenFailure("lanczos: invalid pair count");
  if (max_basis < 0) {
    max_basis = static_cast<int>(std::min<Eigen::Index>(n, std::max(6 * k + 120, 300)));
  }
  max_basis = static_cast<int>(std::min<Eigen::Index>(max_basis, n));
  if (max_basis < k) max_basis = k;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Eigen::VectorXd> basis;
  basis.reserve(static_cast<std::size_t>(max_basis));
  std::vector<double> alpha, beta;  // tridiagonal entries

  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = gauss(rng);
  v.normalize();
  basis.push_back(v);

  Eigen::VectorXd w(n);
  auto reorthogonalize = [&](Eigen::VectorXd& x) {
    for (int pass = 0; pass < 2; ++pass) {
      for (const Eigen::VectorXd& b : basis) x -= b.dot(x) * b;
    }
  };

  EigenPairs result;
  for (int m = 1; m <= max_basis; ++m) {
    op.apply(basis.back(), w);
    const double a = basis.back().dot(w);
    alpha.push_back(a);

    // Ritz values/vectors of the current tridiagonal block.
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) t(i, i) = alpha[static_cast<std::size_t>(i)];
    for (int i = 0; i + 1 < m; ++i) {
      t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tsolve(t);
    if (tsolve.info() != Eigen::Success) {
      throw EigenFailure("lanczos: tridiagonal eigensolver failed");
    }

    w -= a * basis.back();
    if (basis.size() > 1) w -= beta.back() * basis[basis.size() - 2];
    reorthogonalize(w);
    const double b_next = w.norm();

    if (m >= k) {
      // Residual of Ritz pair i is |beta_m * s(m-1, i)|.
      double worst = 0.0;
      for (int i = 0; i < k; ++i) {
        const int col = m - 1 - i;  // largest eigenvalues sit at the end
        worst = std::max(worst, std::abs(b_next * tsolve.eigenvectors()(m - 1, col)));
      }
      const double scale = std::max(1.0, tsolve.eigenvalues().cwiseAbs().maxCoeff());
      if (worst <= tol * scale || m == max_basis || b_next < 1e-13) {
        if (worst > tol * scale && m == max_basis && b_next >= 1e-13) {
          throw EigenFailure("lanczos: basis exhausted before convergence");
        }
        result.values.resize(k);
        result.vectors.resize(n, k);
        for (int i = 0; i < k; ++i) {
          const int col = m - 1 - i;
          result.values[i] = tsolve.eigenvalues()[col];
          Eigen::VectorXd ritz = Eigen::VectorXd::Zero(n);
          for (int j = 0; j < m; ++j) ritz += tsolve.eigenvectors()(j, col) * basis[static_cast<std::size_t>(j)];
          ritz.normalize();
          result.vectors.col(i) = ritz;
        }
        return result;
      }
    }

    if (b_next < 1e-13) {
      // Invariant subspace hit early; restart with a fresh direction.
      Eigen::VectorXd fresh(n);
      for (Eigen::Index i = 0; i < n; ++i) fresh[i] = gauss(rng);
      reorthogonalize(fresh);
      const double norm = fresh.norm();
      if (norm < 1e-13) throw EigenFailure("lanczos: no directions left");
      beta.push_back(0.0);
      basis.push_back(fresh / norm);
    } else {
      beta.push_back(b_next);
      basis.push_back(w / b_next);
    }
  }
  throw EigenFailure("lanczos: did not converge");
}

}  // namespace sleepdyn
