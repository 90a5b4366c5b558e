#include "sleepdyn/svm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <list>
#include <numeric>
#include <random>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace sleepdyn {

namespace {

// FIFO row cache over the RBF kernel matrix.
class KernelCache {
 public:
  KernelCache(const Eigen::MatrixXd& x, double sigma, std::size_t capacity)
      : x_(x),
        gamma_(1.0 / (2.0 * sigma * sigma)),
        capacity_(std::max<std::size_t>(capacity, 2)),
        sq_norms_(x.rows()) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) sq_norms_[i] = x.row(i).squaredNorm();
  }

  const Eigen::VectorXd& row(Eigen::Index i) {
    auto it = rows_.find(i);
    if (it != rows_.end()) return it->second;
    if (rows_.size() >= capacity_) {
      rows_.erase(order_.front());
      order_.pop_front();
    }
    Eigen::VectorXd r =
        (-(sq_norms_.array() + sq_norms_[i] - 2.0 * (x_ * x_.row(i).transpose()).array()) *
         gamma_)
            .cwiseMax(-700.0)
            .exp();
    auto [pos, inserted] = rows_.emplace(i, std::move(r));
    order_.push_back(i);
    return pos->second;
  }

 private:
  const Eigen::MatrixXd& x_;
  double gamma_;
  std::size_t capacity_;
  Eigen::ArrayXd sq_norms_;
  std::unordered_map<Eigen::Index, Eigen::VectorXd> rows_;
  std::list<Eigen::Index> order_;
};

}  // namespace

BinarySvmModel train_binary(const Eigen::MatrixXd& x, std::span<const int> labels,
                            const SvmTrainOptions& opt) {
  const Eigen::Index n = x.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw DimensionMismatch("label count does not match feature rows");
  }
  if (!(opt.c > 0.0) || !(opt.sigma > 0.0)) {
    throw ConfigInvalid("svm needs positive C and sigma");
  }
  if (!x.allFinite()) throw NonFiniteFeature("non-finite training feature");
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y == 1) has_pos = true;
    else if (y == -1) has_neg = true;
    else throw DimensionMismatch("binary labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) {
    throw SingleClassInput("binary training set needs both signs");
  }

  KernelCache cache(x, opt.sigma, opt.kernel_cache_rows);
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  // grad_i = y_i * sum_j alpha_j y_j K_ij - 1
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
  const double c = opt.c;

  auto in_up = [&](Eigen::Index i) {
    return (labels[i] > 0 && alpha[i] < c) || (labels[i] < 0 && alpha[i] > 0.0);
  };
  auto in_low = [&](Eigen::Index i) {
    return (labels[i] > 0 && alpha[i] > 0.0) || (labels[i] < 0 && alpha[i] < c);
  };

  double gap = 0.0;
  long iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    Eigen::Index i = -1, j = -1;
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
      const double v = -static_cast<double>(labels[k]) * grad[k];
      if (in_up(k) && v > m_up) {
        m_up = v;
        i = k;
      }
      if (in_low(k) && v < m_low) {
        m_low = v;
        j = k;
      }
    }
    gap = m_up - m_low;
    if (gap <= opt.tol || i < 0 || j < 0) break;

    // Copies: fetching one row may evict the other from the cache.
    const Eigen::VectorXd ki = cache.row(i);
    const Eigen::VectorXd kj = cache.row(j);

    // Step along (alpha_i += y_i t, alpha_j -= y_j t), clipped to the box.
    double quad = ki[i] + kj[j] - 2.0 * ki[j];
    if (quad <= 1e-12) quad = 1e-12;
    double t = gap / quad;
    const double cap_i = labels[i] > 0 ? c - alpha[i] : alpha[i];
    const double cap_j = labels[j] > 0 ? alpha[j] : c - alpha[j];
    t = std::min(t, std::min(cap_i, cap_j));

    alpha[i] += labels[i] > 0 ? t : -t;
    alpha[j] -= labels[j] > 0 ? t : -t;
    for (Eigen::Index k = 0; k < n; ++k) {
      grad[k] += static_cast<double>(labels[k]) * t * (ki[k] - kj[k]);
    }
  }

  // Bias from unbounded support vectors; fall back to the violating-pair
  // midpoint when every support vector sits on the box.
  double bias_sum = 0.0;
  int bias_count = 0;
  double m_up = -std::numeric_limits<double>::infinity();
  double m_low = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double v = -static_cast<double>(labels[k]) * grad[k];
    if (in_up(k)) m_up = std::max(m_up, v);
    if (in_low(k)) m_low = std::min(m_low, v);
    if (alpha[k] > 0.0 && alpha[k] < c) {
      bias_sum += v;
      ++bias_count;
    }
  }
  const double bias = bias_count > 0 ? bias_sum / bias_count : 0.5 * (m_up + m_low);

  // Dual objective: sum(alpha) - 0.5 sum_ij alpha_i alpha_j y_i y_j K_ij,
  // using grad = Q alpha - 1 elementwise times nothing fancy:
  // alpha^T Q alpha = alpha . (grad + 1).
  const double dual = alpha.sum() - 0.5 * alpha.dot(grad + Eigen::VectorXd::Ones(n));

  BinarySvmModel model;
  model.sigma = opt.sigma;
  model.c = c;
  model.bias = bias;
  model.kkt_gap = std::max(0.0, gap);
  model.dual_objective = dual;
  std::vector<Eigen::Index> sv;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (alpha[k] > 0.0) sv.push_back(k);
  }
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  model.dual_coeffs.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t r = 0; r < sv.size(); ++r) {
    model.support_vectors.row(static_cast<Eigen::Index>(r)) = x.row(sv[r]);
    model.dual_coeffs[static_cast<Eigen::Index>(r)] =
        alpha[sv[r]] * static_cast<double>(labels[sv[r]]);
  }
  return model;
}

Eigen::VectorXd decision_values(const BinarySvmModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.support_vectors.cols()) {
    throw DimensionMismatch("query dimension does not match the trained model");
  }
  const double gamma = 1.0 / (2.0 * model.sigma * model.sigma);
  Eigen::VectorXd out(x.rows());
  Eigen::ArrayXd sv_norms(model.support_vectors.rows());
  for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i) {
    sv_norms[i] = model.support_vectors.row(i).squaredNorm();
  }
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double xn = x.row(r).squaredNorm();
    const Eigen::ArrayXd d2 =
        sv_norms + xn - 2.0 * (model.support_vectors * x.row(r).transpose()).array();
    out[r] = ((-d2 * gamma).cwiseMax(-700.0).exp() * model.dual_coeffs.array()).sum() +
             model.bias;
  }
  return out;
}

double decision_value(const BinarySvmModel& model, const Eigen::VectorXd& x) {
  return decision_values(model, x.transpose())[0];
}

OvaModel train_ova(const Eigen::MatrixXd& x, std::span<const SleepStage> labels,
                   const SvmTrainOptions& opt, int threads) {
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) {
    throw DimensionMismatch("label count does not match feature rows");
  }
  std::array<bool, kNumStages> present{};
  int distinct = 0;
  for (SleepStage s : labels) {
    if (!is_scorable(s)) throw SingleClassInput("Excluded epochs cannot train the OVA model");
    if (!present[static_cast<int>(s)]) {
      present[static_cast<int>(s)] = true;
      ++distinct;
    }
  }
  if (distinct < 2) throw SingleClassInput("OVA training needs at least two classes");

  auto train_one = [&](int cls) -> BinarySvmModel {
    std::vector<int> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      y[i] = static_cast<int>(labels[i]) == cls ? 1 : -1;
    }
    return train_binary(x, y, opt);
  };

  OvaModel model;
  if (threads == 1) {
    for (int cls = 0; cls < kNumStages; ++cls) {
      if (present[cls]) model.models[cls] = train_one(cls);
    }
    return model;
  }
  std::array<std::future<BinarySvmModel>, kNumStages> futures;
  for (int cls = 0; cls < kNumStages; ++cls) {
    if (present[cls]) {
      futures[cls] = std::async(std::launch::async, train_one, cls);
    }
  }
  for (int cls = 0; cls < kNumStages; ++cls) {
    if (present[cls]) model.models[cls] = futures[cls].get();
  }
  return model;
}

std::vector<SleepStage> predict(const OvaModel& model, const Eigen::MatrixXd& x) {
  std::array<Eigen::VectorXd, kNumStages> scores;
  for (int cls = 0; cls < kNumStages; ++cls) {
    if (model.models[cls]) scores[cls] = decision_values(*model.models[cls], x);
  }
  std::vector<SleepStage> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int cls = 0; cls < kNumStages; ++cls) {
      if (!model.models[cls]) continue;
      const double s = scores[cls][r];
      if (s > best_score) {
        best_score = s;
        best = cls;
      }
    }
    if (best < 0) throw SingleClassInput("OVA model has no trained classes");
    out[static_cast<std::size_t>(r)] = static_cast<SleepStage>(best);
  }
  return out;
}

double median_heuristic_sigma(const Eigen::MatrixXd& x, std::size_t max_points,
                              std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  if (n < 2) throw SizeMismatch("median heuristic needs at least two points");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  if (static_cast<std::size_t>(n) > max_points) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max_points);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<double> d;
  d.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      d.push_back((x.row(idx[a]) - x.row(idx[b])).norm());
    }
  }
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  const double median = d[mid];
  if (median <= 0.0) throw DegenerateCloud("median pairwise distance is zero");
  return median;
}

namespace {

void write_vector(std::ofstream& out, const Eigen::VectorXd& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * v.size()));
}

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  }
}

}  // namespace

void save_ova_model(const OvaModel& model, const std::filesystem::path& path) {
  nlohmann::json manifest;
  manifest["format"] = "sleepdyn-ova";
  manifest["version"] = 1;
  nlohmann::json classes = nlohmann::json::array();
  for (int cls = 0; cls < kNumStages; ++cls) {
    if (!model.models[cls]) continue;
    const BinarySvmModel& m = *model.models[cls];
    classes.push_back({{"stage", std::string(to_string(static_cast<SleepStage>(cls)))},
                       {"support_vectors", m.support_vectors.rows()},
                       {"dim", m.support_vectors.cols()},
                       {"bias", m.bias},
                       {"sigma", m.sigma},
                       {"c", m.c},
                       {"kkt_gap", m.kkt_gap},
                       {"dual_objective", m.dual_objective}});
  }
  manifest["classes"] = classes;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write model file " + path.string());
  const std::string header = manifest.dump();
  const std::uint64_t header_len = header.size();
  out.write("SDSV", 4);
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (int cls = 0; cls < kNumStages; ++cls) {
    if (!model.models[cls]) continue;
    write_matrix(out, model.models[cls]->support_vectors);
    write_vector(out, model.models[cls]->dual_coeffs);
  }
}

OvaModel load_ova_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != "SDSV") {
    throw CacheCorrupt("bad SVM model magic in " + path.string());
  }
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw CacheCorrupt("truncated SVM model header in " + path.string());
  const nlohmann::json manifest = nlohmann::json::parse(header, nullptr, false);
  if (manifest.is_discarded() || manifest.value("format", "") != "sleepdyn-ova" ||
      manifest.value("version", 0) != 1) {
    throw CacheCorrupt("unrecognized SVM model manifest in " + path.string());
  }

  OvaModel model;
  for (const auto& cls : manifest.at("classes")) {
    const auto stage = stage_from_string(cls.at("stage").get<std::string>());
    if (!stage || !is_scorable(*stage)) {
      throw CacheCorrupt("bad stage name in SVM model manifest");
    }
    BinarySvmModel m;
    const auto rows = cls.at("support_vectors").get<Eigen::Index>();
    const auto dim = cls.at("dim").get<Eigen::Index>();
    m.bias = cls.at("bias").get<double>();
    m.sigma = cls.at("sigma").get<double>();
    m.c = cls.at("c").get<double>();
    m.kkt_gap = cls.at("kkt_gap").get<double>();
    m.dual_objective = cls.at("dual_objective").get<double>();
    m.support_vectors.resize(rows, dim);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < dim; ++c) {
        double v = 0.0;
        in.read(reinterpret_cast<char*>(&v), sizeof(double));
        m.support_vectors(r, c) = v;
      }
    }
    m.dual_coeffs.resize(rows);
    in.read(reinterpret_cast<char*>(m.dual_coeffs.data()),
            static_cast<std::streamsize>(sizeof(double) * rows));
    if (!in) throw CacheCorrupt("truncated SVM model payload in " + path.string());
    model.models[static_cast<int>(*stage)] = std::move(m);
  }
  return model;
}

}  // namespace sleepdyn
