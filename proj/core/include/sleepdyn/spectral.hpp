#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>

#include "sleepdyn/errors.hpp"

namespace sleepdyn {

// Eigenpairs sorted by descending eigenvalue; vectors are unit-norm columns.
struct EigenPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

// Matrix-free symmetric operator.
struct SymmetricOperator {
  Eigen::Index n = 0;
  std::function<void(const Eigen::VectorXd& in, Eigen::VectorXd& out)> apply;
};

// Full dense symmetric eigendecomposition, descending order.
EigenPairs dense_symmetric_eigs(const Eigen::MatrixXd& sym);

// k algebraically largest eigenpairs via Lanczos with full
// reorthogonalization; deterministic for a fixed seed.
EigenPairs lanczos_largest(const SymmetricOperator& op, int k,
                           std::uint64_t seed = 0x5d2e1f3a, double tol = 1e-10,
                           int max_basis = -1);

// Flips each column so its largest-magnitude entry is positive.
void canonicalize_signs(Eigen::MatrixXd& vectors);

}  // namespace sleepdyn
