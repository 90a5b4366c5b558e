#include "sleepdyn/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace sleepdyn {

namespace {

// Pairwise Euclidean distance via the Gram expansion, floored at zero.
double pair_distance(const Eigen::MatrixXd& pts, Eigen::Index i, Eigen::Index j) {
  return (pts.row(i) - pts.row(j)).norm();
}

double nearest_rank(std::vector<double>& values, double fraction) {
  const auto m = static_cast<std::size_t>(values.size());
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(m)));
  rank = std::clamp<std::size_t>(rank, 1, m);
  std::nth_element(values.begin(), values.begin() + (rank - 1), values.end());
  return values[rank - 1];
}

double percentile_scale(const Eigen::MatrixXd& pts, const AffinityOptions& opt) {
  const Eigen::Index j = pts.rows();
  std::vector<double> d;
  if (j <= opt.max_exact_points) {
    d.reserve(static_cast<std::size_t>(j) * (j - 1) / 2);
    for (Eigen::Index a = 0; a < j; ++a) {
      for (Eigen::Index b = a + 1; b < j; ++b) d.push_back(pair_distance(pts, a, b));
    }
  } else {
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, j - 1);
    d.reserve(opt.pair_sample);
    while (d.size() < opt.pair_sample) {
      const Eigen::Index a = pick(rng);
      const Eigen::Index b = pick(rng);
      if (a == b) continue;
      d.push_back(pair_distance(pts, a, b));
    }
  }
  return nearest_rank(d, opt.percentile);
}

}  // namespace

Eigen::VectorXd AffinityGraph::degrees() const {
  if (is_sparse) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(points);
    for (int k = 0; k < sparse.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(sparse, k); it; ++it) {
        d[it.row()] += it.value();
      }
    }
    return d;
  }
  return dense.rowwise().sum();
}

Eigen::VectorXd AffinityGraph::apply(const Eigen::VectorXd& v) const {
  if (is_sparse) return sparse * v;
  return dense * v;
}

AffinityGraph affinity_matrix(const Eigen::MatrixXd& points, double percentile) {
  AffinityOptions opt;
  opt.percentile = percentile;
  return affinity_matrix(points, opt);
}

AffinityGraph affinity_matrix(const Eigen::MatrixXd& points,
                              const AffinityOptions& opt) {
  const Eigen::Index j = points.rows();
  if (j < 2) throw SizeMismatch("affinity graph needs at least two points");
  if (!(opt.percentile > 0.0 && opt.percentile <= 1.0)) {
    throw ConfigInvalid("affinity percentile must lie in (0, 1]");
  }

  const double eps = percentile_scale(points, opt);
  if (eps <= 0.0) {
    throw DegenerateCloud("all pairwise distances at the chosen percentile are zero");
  }

  AffinityGraph g;
  g.points = j;
  g.epsilon_scale = eps;

  if (j <= opt.knn_threshold) {
    g.is_sparse = false;
    g.dense.resize(j, j);
    for (Eigen::Index a = 0; a < j; ++a) {
      g.dense(a, a) = 1.0;
      for (Eigen::Index b = a + 1; b < j; ++b) {
        const double w = std::exp(-pair_distance(points, a, b) / eps);
        g.dense(a, b) = w;
        g.dense(b, a) = w;
      }
    }
    return g;
  }

  // Symmetrized (union) k-NN sparsification for large clouds.
  const int k = static_cast<int>(std::min<Eigen::Index>(opt.knn, j - 1));
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * static_cast<std::size_t>(j) * (k + 1));
  std::vector<std::pair<double, Eigen::Index>> row(static_cast<std::size_t>(j));
  for (Eigen::Index a = 0; a < j; ++a) {
    for (Eigen::Index b = 0; b < j; ++b) {
      row[static_cast<std::size_t>(b)] = {b == a ? 0.0 : pair_distance(points, a, b), b};
    }
    std::partial_sort(row.begin(), row.begin() + k + 1, row.end());
    for (int r = 0; r <= k; ++r) {
      const auto [dist, b] = row[static_cast<std::size_t>(r)];
      const double w = std::exp(-dist / eps);
      triplets.emplace_back(a, b, w);
      triplets.emplace_back(b, a, w);
    }
  }
  g.sparse.resize(j, j);
  g.sparse.setFromTriplets(triplets.begin(), triplets.end(),
                           [](const double& a, const double& b) { return std::max(a, b); });
  g.is_sparse = true;
  return g;
}

namespace {

struct NormalizedSpectrum {
  Eigen::VectorXd values;
  Eigen::MatrixXd right_vectors;  // D^{-1/2} O, unit columns, canonical signs
};

// Eigenpairs of D^{-1} W via the symmetric conjugate D^{-1/2} W D^{-1/2}.
NormalizedSpectrum normalized_spectrum(const AffinityGraph& graph, int pairs,
                                       Eigen::Index dense_threshold,
                                       std::uint64_t seed) {
  const Eigen::Index n = graph.points;
  const Eigen::VectorXd deg = graph.degrees();
  if ((deg.array() <= 0.0).any()) {
    throw DegenerateCloud("affinity graph has an isolated point");
  }
  const Eigen::VectorXd dinv_sqrt = deg.array().rsqrt();

  EigenPairs eig;
  if (n <= dense_threshold) {
    Eigen::MatrixXd sym;
    if (graph.is_sparse) {
      sym = Eigen::MatrixXd(graph.sparse);
    } else {
      sym = graph.dense;
    }
    sym = dinv_sqrt.asDiagonal() * sym * dinv_sqrt.asDiagonal();
    // Symmetrize roundoff before the solver.
    sym = 0.5 * (sym + sym.transpose()).eval();
    EigenPairs full = dense_symmetric_eigs(sym);
    eig.values = full.values.head(pairs);
    eig.vectors = full.vectors.leftCols(pairs);
  } else {
    SymmetricOperator op;
    op.n = n;
    op.apply = [&graph, &dinv_sqrt](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
      out = dinv_sqrt.asDiagonal() * graph.apply(dinv_sqrt.asDiagonal() * in);
    };
    eig = lanczos_largest(op, pairs, seed);
  }

  NormalizedSpectrum out;
  out.values = eig.values;
  out.right_vectors = dinv_sqrt.asDiagonal() * eig.vectors;
  for (Eigen::Index c = 0; c < out.right_vectors.cols(); ++c) {
    out.right_vectors.col(c).normalize();
  }
  canonicalize_signs(out.right_vectors);
  return out;
}

// sigma^t, with negative roundoff clamped before the fractional power.
double eigen_weight(double value, double t) {
  return std::pow(std::max(value, 0.0), t);
}

}  // namespace

DiffusionEmbedding diffusion_map(const AffinityGraph& graph,
                                 const DiffusionOptions& opt) {
  if (!(opt.t > 0.0)) throw ConfigInvalid("diffusion time must be positive");
  if (opt.dim < 1 || opt.dim > graph.points - 1) {
    throw ConfigInvalid("embedding dimension must lie in [1, J-1]");
  }
  const int pairs = opt.dim + 1;
  NormalizedSpectrum spec =
      normalized_spectrum(graph, pairs, opt.dense_threshold, opt.seed);

  DiffusionEmbedding emb;
  emb.eigenvalues = std::move(spec.values);
  emb.eigenvectors = std::move(spec.right_vectors);
  emb.diffusion_time = opt.t;
  emb.coordinates.resize(graph.points, opt.dim);
  for (int c = 0; c < opt.dim; ++c) {
    emb.coordinates.col(c) =
        eigen_weight(emb.eigenvalues[c + 1], opt.t) * emb.eigenvectors.col(c + 1);
  }
  return emb;
}

double diffusion_distance(const DiffusionEmbedding& emb, Eigen::Index i,
                          Eigen::Index j) {
  if (i < 0 || j < 0 || i >= emb.coordinates.rows() || j >= emb.coordinates.rows()) {
    throw IndexOutOfRange("diffusion distance indices outside the point cloud");
  }
  return (emb.coordinates.row(i) - emb.coordinates.row(j)).norm();
}

CommonEmbedding multiview_dm(const AffinityGraph& gx, const AffinityGraph& gy,
                             const DiffusionOptions& opt) {
  if (gx.points != gy.points) {
    throw SizeMismatch("multiview channels carry different epoch counts");
  }
  const Eigen::Index j = gx.points;
  if (!(opt.t > 0.0)) throw ConfigInvalid("diffusion time must be positive");
  if (opt.dim < 1 || opt.dim > j - 1) {
    throw ConfigInvalid("fusion dimension must lie in [1, J-1]");
  }
  const int pairs = opt.dim + 1;

  // Degrees of [[0, B],[B^T, 0]] with B = Wx Wy, computed without forming B.
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(j);
  const Eigen::VectorXd deg_top = gx.apply(gy.apply(ones));
  const Eigen::VectorXd deg_bottom = gy.apply(gx.apply(ones));
  if ((deg_top.array() <= 0.0).any() || (deg_bottom.array() <= 0.0).any()) {
    throw DegenerateCloud("bipartite composition has an isolated point");
  }
  Eigen::VectorXd dinv_sqrt(2 * j);
  dinv_sqrt.head(j) = deg_top.array().rsqrt();
  dinv_sqrt.tail(j) = deg_bottom.array().rsqrt();

  EigenPairs eig;
  if (2 * j <= opt.dense_threshold) {
    Eigen::MatrixXd b;
    if (gx.is_sparse || gy.is_sparse) {
      Eigen::MatrixXd wx = gx.is_sparse ? Eigen::MatrixXd(gx.sparse) : gx.dense;
      Eigen::MatrixXd wy = gy.is_sparse ? Eigen::MatrixXd(gy.sparse) : gy.dense;
      b = wx * wy;
    } else {
      b = gx.dense * gy.dense;
    }
    Eigen::MatrixXd sym = Eigen::MatrixXd::Zero(2 * j, 2 * j);
    sym.topRightCorner(j, j) = b;
    sym.bottomLeftCorner(j, j) = b.transpose();
    sym = dinv_sqrt.asDiagonal() * sym * dinv_sqrt.asDiagonal();
    sym = 0.5 * (sym + sym.transpose()).eval();
    EigenPairs full = dense_symmetric_eigs(sym);
    eig.values = full.values.head(pairs);
    eig.vectors = full.vectors.leftCols(pairs);
  } else {
    SymmetricOperator op;
    op.n = 2 * j;
    op.apply = [&gx, &gy, &dinv_sqrt, j](const Eigen::VectorXd& in,
                                         Eigen::VectorXd& out) {
      const Eigen::VectorXd scaled = dinv_sqrt.asDiagonal() * in;
      Eigen::VectorXd prod(2 * j);
      prod.head(j) = gx.apply(gy.apply(scaled.tail(j)));
      prod.tail(j) = gy.apply(gx.apply(scaled.head(j)));
      out = dinv_sqrt.asDiagonal() * prod;
    };
    eig = lanczos_largest(op, pairs, opt.seed);
  }

  // Positive half of the spectrum only: sigma^t is undefined below zero and
  // the negative half mirrors the positive one on the bipartite walk.
  if ((eig.values.array() <= 1e-12).any()) {
    throw EigenFailure("multiview spectrum has fewer than dim+1 positive eigenvalues");
  }

  CommonEmbedding emb;
  emb.eigenvalues = eig.values;
  emb.eigenvectors = dinv_sqrt.asDiagonal() * eig.vectors;
  for (Eigen::Index c = 0; c < emb.eigenvectors.cols(); ++c) {
    emb.eigenvectors.col(c).normalize();
  }
  canonicalize_signs(emb.eigenvectors);
  emb.diffusion_time = opt.t;

  emb.common.resize(j, 2 * opt.dim);
  for (int c = 0; c < opt.dim; ++c) {
    const double w = eigen_weight(emb.eigenvalues[c + 1], opt.t);
    emb.common.col(c) = w * emb.eigenvectors.col(c + 1).head(j);
    emb.common.col(opt.dim + c) = w * emb.eigenvectors.col(c + 1).tail(j);
  }
  return emb;
}

Eigen::MatrixXd concat_embeddings(const DiffusionEmbedding& x,
                                  const DiffusionEmbedding& y) {
  if (x.coordinates.rows() != y.coordinates.rows()) {
    throw SizeMismatch("concatenation requires equal epoch counts");
  }
  Eigen::MatrixXd out(x.coordinates.rows(), x.coordinates.cols() + y.coordinates.cols());
  out << x.coordinates, y.coordinates;
  return out;
}

int suggest_embedding_dim(const Eigen::VectorXd& eigenvalues, int max_dim) {
  const int last = std::min<int>(max_dim, static_cast<int>(eigenvalues.size()) - 2);
  if (last < 1) return 1;
  int best = 1;
  double best_gap = -1.0;
  for (int d = 1; d <= last; ++d) {
    const double gap = eigenvalues[d] - eigenvalues[d + 1];
    if (gap > best_gap) {
      best_gap = gap;
      best = d;
    }
  }
  return best;
}

}  // namespace sleepdyn
