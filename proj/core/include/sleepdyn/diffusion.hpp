#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <vector>

#include "sleepdyn/errors.hpp"
#include "sleepdyn/spectral.hpp"

namespace sleepdyn {

struct AffinityOptions {
  double percentile = 0.01;  // fraction of pairwise distances used as the scale
  // Exact percentile up to this many points; sampled above.
  Eigen::Index max_exact_points = 20000;
  std::uint64_t pair_sample = 10'000'000;
  // Dense affinity up to this many points; symmetrized k-NN above.
  Eigen::Index knn_threshold = 10000;
  int knn = 256;
  std::uint64_t seed = 42;
};

// Symmetric positive affinities W(i,j) = exp(-d(i,j)/eps) with unit diagonal;
// dense or k-NN-sparsified depending on the point count.
struct AffinityGraph {
  Eigen::Index points = 0;
  double epsilon_scale = 0.0;
  bool is_sparse = false;
  Eigen::MatrixXd dense;
  Eigen::SparseMatrix<double> sparse;

  Eigen::VectorXd degrees() const;
  // W * v regardless of storage.
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
};

// Rows of `points` are feature vectors. The bandwidth is the given percentile
// (nearest rank) of the pairwise Euclidean distances.
AffinityGraph affinity_matrix(const Eigen::MatrixXd& points, double percentile);
AffinityGraph affinity_matrix(const Eigen::MatrixXd& points,
                              const AffinityOptions& options);

struct DiffusionOptions {
  double t = 0.3;     // diffusion time
  int dim = 80;       // d-hat: embedding coordinates (eigenpairs 2..dim+1)
  Eigen::Index dense_threshold = 2000;  // dense eigensolve up to this size
  std::uint64_t seed = 0x5d2e1f3a;      // Lanczos start vector
};

// Right eigenpairs of D^{-1} W computed through the symmetric conjugate
// D^{-1/2} W D^{-1/2}; eigenvectors are unit-norm, sign-canonicalized, and
// phi_1 is constant. Coordinates weight eigenvectors 2..dim+1 by lambda^t.
struct DiffusionEmbedding {
  Eigen::VectorXd eigenvalues;   // descending, lambda_1 ~ 1
  Eigen::MatrixXd eigenvectors;  // points x (dim + 1)
  double diffusion_time = 0.0;
  Eigen::MatrixXd coordinates;   // points x dim
};

DiffusionEmbedding diffusion_map(const AffinityGraph& graph,
                                 const DiffusionOptions& options);

double diffusion_distance(const DiffusionEmbedding& embedding, Eigen::Index i,
                          Eigen::Index j);

// Two-channel fusion: random walk on the bipartite block matrix
// [[0, Wx*Wy], [Wy*Wx, 0]]. Eigenpairs are taken from the positive half of
// the (symmetric about zero) spectrum; the common feature of epoch j
// concatenates entries j and J+j of eigenvectors 2..dim+1 weighted by
// sigma^t.
struct CommonEmbedding {
  Eigen::VectorXd eigenvalues;   // descending positive half, sigma_1 ~ 1
  Eigen::MatrixXd eigenvectors;  // 2J x (dim + 1)
  double diffusion_time = 0.0;
  Eigen::MatrixXd common;        // J x 2*dim
};

CommonEmbedding multiview_dm(const AffinityGraph& graph_x,
                             const AffinityGraph& graph_y,
                             const DiffusionOptions& options);

// Per-point concatenation [x-coords || y-coords], the fusion ablation
// baseline.
Eigen::MatrixXd concat_embeddings(const DiffusionEmbedding& x,
                                  const DiffusionEmbedding& y);

// Largest spectral gap heuristic over eigenvalues 2..max_dim+1; returns the
// dimension whose trailing gap is widest.
int suggest_embedding_dim(const Eigen::VectorXd& eigenvalues, int max_dim);

}  // namespace sleepdyn
