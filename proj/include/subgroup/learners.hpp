#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <memory>
#include <numeric>
#include <vector>

#include "subgroup/math.hpp"
#include "subgroup/model.hpp"
#include "subgroup/rng.hpp"

namespace subgroup {

enum class LearnerKind {
  kConstantMean,
  kLinearMain,
  kLinearInteraction,
  kRegressionTree,
  kSplineAdditive,
};

enum class LossKind { kSquaredError, kLogLikelihood };

struct LearnerConfig {
  std::vector<LearnerKind> library = {
      LearnerKind::kConstantMean, LearnerKind::kLinearMain,
      LearnerKind::kLinearInteraction, LearnerKind::kRegressionTree,
      LearnerKind::kSplineAdditive};
  std::size_t folds = 10;
  std::size_t tree_depth = 3;
  std::size_t min_leaf = 10;
  std::size_t irls_max_iter = 50;
  double irls_tol = 1e-8;
};

/// V-fold partition: round-robin over a seeded shuffle, fold sizes
/// differing by at most one.
struct FoldAssignment {
  std::vector<std::size_t> fold_of;
  std::size_t num_folds = 0;

  static FoldAssignment make(std::size_t n, std::size_t folds, RngSeed seed) {
    FoldAssignment fa;
    fa.num_folds = std::min(folds, n);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    CounterRng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = rng.next_u64() % i;
      std::swap(perm[i - 1], perm[j]);
    }
    fa.fold_of.resize(n);
    for (std::size_t i = 0; i < n; ++i) fa.fold_of[perm[i]] = i % fa.num_folds;
    return fa;
  }
};

struct EnsembleWeights {
  std::vector<double> weights;  // nonnegative, sums to 1
};

namespace detail {

inline double empirical_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& y,
                             LossKind loss) {
  const auto n = pred.size();
  double acc = 0.0;
  if (loss == LossKind::kSquaredError) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = pred[i] - y[i];
      acc += r * r;
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = clamp(pred[i], 1e-12, 1.0 - 1e-12);
      acc -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
    }
  }
  return acc / static_cast<double>(n);
}

}  // namespace detail

/// Convex-combination weights minimizing the empirical CV loss over the
/// simplex. Starts at the best single candidate and descends over
/// coordinate pairs (exact line search for squared error, safeguarded
/// Newton for log-likelihood), so the result is never worse than the
/// best vertex.
inline EnsembleWeights solve_simplex_weights(const Eigen::MatrixXd& cv_predictions,
                                             const Eigen::VectorXd& targets,
                                             LossKind loss) {
  const Eigen::Index k = cv_predictions.rows();
  const Eigen::Index n = cv_predictions.cols();
  if (k == 0 || n == 0) {
    throw std::invalid_argument("solve_simplex_weights: empty inputs");
  }
  if (!cv_predictions.allFinite() || !targets.allFinite()) {
    throw std::invalid_argument("solve_simplex_weights: non-finite inputs");
  }
  if (k == 1) return {{1.0}};

  Eigen::Index best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < k; ++j) {
    const double l = detail::empirical_loss(cv_predictions.row(j).transpose(),
                                            targets, loss);
    if (l < best_loss) {
      best_loss = l;
      best = j;
    }
  }
  std::vector<double> w(static_cast<std::size_t>(k), 0.0);
  w[static_cast<std::size_t>(best)] = 1.0;
  Eigen::VectorXd combined = cv_predictions.row(best).transpose();
  double cur_loss = best_loss;

  for (int sweep = 0; sweep < 500; ++sweep) {
    const double sweep_start = cur_loss;
    for (Eigen::Index j = 0; j < k; ++j) {
      for (Eigen::Index m = 0; m < k; ++m) {
        if (j == m || w[static_cast<std::size_t>(j)] <= 0.0) continue;
        // Move mass t from candidate j to m: t in [-w_m, w_j].
        const Eigen::VectorXd d =
            cv_predictions.row(m).transpose() - cv_predictions.row(j).transpose();
        const double dd = d.squaredNorm();
        if (dd < 1e-300) continue;
        const double lo = -w[static_cast<std::size_t>(m)];
        const double hi = w[static_cast<std::size_t>(j)];
        double t;
        if (loss == LossKind::kSquaredError) {
          t = clamp(-(combined - targets).dot(d) / dd, lo, hi);
        } else {
          t = 0.0;
          for (int it = 0; it < 40; ++it) {
            double g = 0.0, h = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
              const double c = clamp(combined[i] + t * d[i], 1e-12, 1.0 - 1e-12);
              g += d[i] * (c - targets[i]) / (c * (1.0 - c));
              h += d[i] * d[i] *
                   (targets[i] / (c * c) + (1.0 - targets[i]) / ((1.0 - c) * (1.0 - c)));
            }
            if (std::abs(g) < 1e-14 * static_cast<double>(n) || h <= 0.0) break;
            const double step = g / h;
            const double t_new = clamp(t - step, lo, hi);
            if (std::abs(t_new - t) < 1e-16) {
              t = t_new;
              break;
            }
            t = t_new;
          }
        }
        if (t == 0.0) continue;
        const Eigen::VectorXd cand = combined + t * d;
        const double cand_loss = detail::empirical_loss(cand, targets, loss);
        if (cand_loss < cur_loss) {
          combined = cand;
          cur_loss = cand_loss;
          w[static_cast<std::size_t>(j)] -= t;
          w[static_cast<std::size_t>(m)] += t;
        }
      }
    }
    if (sweep_start - cur_loss < 1e-13 * (std::abs(sweep_start) + 1.0)) break;
  }

  // Renormalize away rounding drift.
  double total = 0.0;
  for (auto& wj : w) {
    wj = std::max(wj, 0.0);
    total += wj;
  }
  for (auto& wj : w) wj /= total;
  return {std::move(w)};
}

// --- Candidate learners ---

class FittedLearner {
 public:
  virtual ~FittedLearner() = default;
  virtual double predict(const double* x, std::size_t p) const = 0;
};

using LearnerPtr = std::shared_ptr<const FittedLearner>;

namespace detail {

/// Arm-wise mean when the first feature is the binary treatment,
/// otherwise a single global mean.
class ConstantMeanLearner final : public FittedLearner {
 public:
  ConstantMeanLearner(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      bool first_is_binary) {
    const double overall = y.size() > 0 ? y.mean() : 0.0;
    mean_[0] = mean_[1] = overall;
    stratified_ = first_is_binary;
    if (first_is_binary) {
      double s0 = 0.0, s1 = 0.0;
      std::size_t n0 = 0, n1 = 0;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (x(i, 0) > 0.5) {
          s1 += y[i];
          ++n1;
        } else {
          s0 += y[i];
          ++n0;
        }
      }
      if (n0 > 0) mean_[0] = s0 / static_cast<double>(n0);
      if (n1 > 0) mean_[1] = s1 / static_cast<double>(n1);
    }
  }

  double predict(const double* x, std::size_t) const override {
    return stratified_ ? mean_[x[0] > 0.5 ? 1 : 0] : mean_[0];
  }

 private:
  double mean_[2];
  bool stratified_ = false;
};

enum class BasisKind { kMain, kInteraction, kSpline };

struct SplineKnots {
  // Per raw feature: three interior knots (empirical quartiles).
  std::vector<std::array<double, 3>> knots;
};

inline SplineKnots spline_knots(const Eigen::MatrixXd& x, std::size_t skip_first) {
  SplineKnots sk;
  const std::size_t p = static_cast<std::size_t>(x.cols());
  sk.knots.resize(p);
  std::vector<double> col(static_cast<std::size_t>(x.rows()));
  for (std::size_t j = skip_first; j < p; ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      col[static_cast<std::size_t>(i)] = x(i, static_cast<Eigen::Index>(j));
    std::sort(col.begin(), col.end());
    const auto q = [&](double f) {
      const double pos = f * static_cast<double>(col.size() - 1);
      const std::size_t lo = static_cast<std::size_t>(pos);
      const double frac = pos - static_cast<double>(lo);
      return lo + 1 < col.size() ? col[lo] * (1.0 - frac) + col[lo + 1] * frac
                                 : col[lo];
    };
    sk.knots[j] = {q(0.25), q(0.5), q(0.75)};
  }
  return sk;
}

/// Expands one raw feature row into the chosen regression basis
/// (leading constant term included).
inline void expand_basis(BasisKind kind, const double* x, std::size_t p,
                         bool first_is_binary, const SplineKnots* knots,
                         std::vector<double>& out) {
  out.clear();
  out.push_back(1.0);
  for (std::size_t j = 0; j < p; ++j) out.push_back(x[j]);
  if (kind == BasisKind::kInteraction) {
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t m = j + 1; m < p; ++m) out.push_back(x[j] * x[m]);
    }
  } else if (kind == BasisKind::kSpline) {
    // Restricted cubic basis: one nonlinear term per covariate, linear
    // beyond the boundary knots, so the fit extrapolates linearly in the
    // tails like a smoothing-spline GAM.
    const std::size_t start = first_is_binary ? 1 : 0;
    for (std::size_t j = start; j < p; ++j) {
      const auto& k = knots->knots[j];
      const double span = k[2] - k[0];
      const double gap = k[2] - k[1];
      if (span <= 1e-12 || gap <= 1e-12) {
        out.push_back(0.0);
        continue;
      }
      const auto cube = [](double t) { return t * t * t; };
      const double c = cube(positive_part(x[j] - k[0])) -
                       cube(positive_part(x[j] - k[1])) * span / gap +
                       cube(positive_part(x[j] - k[2])) * (k[1] - k[0]) / gap;
      out.push_back(c / (span * span));
    }
  }
}

class LinearBasisLearner final : public FittedLearner {
 public:
  LinearBasisLearner(BasisKind kind, const Eigen::MatrixXd& x,
                     const Eigen::VectorXd& y, LossKind loss, bool first_is_binary,
                     const LearnerConfig& cfg)
      : kind_(kind), first_is_binary_(first_is_binary) {
    const std::size_t p = static_cast<std::size_t>(x.cols());
    if (kind == BasisKind::kSpline) knots_ = spline_knots(x, first_is_binary ? 1 : 0);
    std::vector<double> row;
    expand_basis(kind_, x.row(0).data(), p, first_is_binary_,
                 kind_ == BasisKind::kSpline ? &knots_ : nullptr, row);
    // Note: Eigen rows are not contiguous for column-major storage; copy.
    const Eigen::Index q = static_cast<Eigen::Index>(row.size());
    Eigen::MatrixXd basis(x.rows(), q);
    std::vector<double> raw(p);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < p; ++j) raw[j] = x(i, static_cast<Eigen::Index>(j));
      expand_basis(kind_, raw.data(), p, first_is_binary_,
                   kind_ == BasisKind::kSpline ? &knots_ : nullptr, row);
      for (Eigen::Index j = 0; j < q; ++j)
        basis(i, j) = row[static_cast<std::size_t>(j)];
    }
    logistic_ = loss == LossKind::kLogLikelihood;
    const double ridge = 1e-8 * static_cast<double>(x.rows());
    if (!logistic_) {
      Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(q, q);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(basis.adjoint());
      gram.diagonal().array() += ridge;
      coef_ = Eigen::LDLT<Eigen::MatrixXd, Eigen::Lower>(gram).solve(
          basis.transpose() * y);
    } else {
      fit_irls(basis, y, ridge, cfg);
    }
  }

  double predict(const double* x, std::size_t p) const override {
    thread_local std::vector<double> row;
    expand_basis(kind_, x, p, first_is_binary_,
                 kind_ == BasisKind::kSpline ? &knots_ : nullptr, row);
    double eta = 0.0;
    for (Eigen::Index j = 0; j < coef_.size(); ++j)
      eta += coef_[j] * row[static_cast<std::size_t>(j)];
    return logistic_ ? expit(eta) : eta;
  }

  bool converged() const { return converged_; }

 private:
  void fit_irls(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y, double ridge,
                const LearnerConfig& cfg) {
    const Eigen::Index n = basis.rows(), q = basis.cols();
    coef_ = Eigen::VectorXd::Zero(q);
    double dev_old = std::numeric_limits<double>::infinity();
    converged_ = false;
    for (std::size_t it = 0; it < cfg.irls_max_iter; ++it) {
      Eigen::VectorXd eta = basis * coef_;
      Eigen::VectorXd mu(n), wgt(n);
      double dev = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double m = clamp(expit(eta[i]), 1e-9, 1.0 - 1e-9);
        mu[i] = m;
        wgt[i] = m * (1.0 - m);
        dev -= 2.0 * (y[i] * std::log(m) + (1.0 - y[i]) * std::log(1.0 - m));
      }
      if (std::abs(dev_old - dev) < cfg.irls_tol * (std::abs(dev) + 1.0)) {
        converged_ = true;
        break;
      }
      dev_old = dev;
      const Eigen::MatrixXd weighted =
          basis.array().colwise() * wgt.array().sqrt();
      Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(q, q);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(weighted.adjoint());
      gram.diagonal().array() += ridge;
      const Eigen::VectorXd rhs =
          basis.transpose() * (wgt.cwiseProduct(eta) + (y - mu));
      coef_ = Eigen::LDLT<Eigen::MatrixXd, Eigen::Lower>(gram).solve(rhs);
    }
    // Non-convergence keeps the last iterate.
  }

  BasisKind kind_;
  bool first_is_binary_;
  bool logistic_ = false;
  bool converged_ = true;
  SplineKnots knots_;
  Eigen::VectorXd coef_;
};

/// CART-style regression tree: squared-error splits, bounded depth,
/// minimum leaf size.
class RegressionTreeLearner final : public FittedLearner {
 public:
  RegressionTreeLearner(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        const LearnerConfig& cfg) {
    const std::size_t n = static_cast<std::size_t>(x.rows());
    const std::size_t p = static_cast<std::size_t>(x.cols());
    columns_.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
      columns_[j].resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        columns_[j][i] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
    targets_.assign(y.data(), y.data() + y.size());
    // Sort each feature once; child nodes partition the sorted lists.
    std::vector<std::vector<std::uint32_t>> sorted(p);
    for (std::size_t j = 0; j < p; ++j) {
      sorted[j].resize(n);
      std::iota(sorted[j].begin(), sorted[j].end(), 0);
      const auto& col = columns_[j];
      std::sort(sorted[j].begin(), sorted[j].end(),
                [&col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    }
    // CART complexity guard: a split must reduce the total SSE by at
    // least this fraction of the root SSE, so pure-noise targets yield
    // a constant fit.
    const double mean = y.mean();
    double root_sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = targets_[i] - mean;
      root_sse += d * d;
    }
    min_gain_ = std::max(1e-12, kComplexity * root_sse);
    root_ = build(sorted, cfg.tree_depth, cfg.min_leaf);
    columns_.clear();
    targets_.clear();
  }

  double predict(const double* x, std::size_t) const override {
    int node = root_;
    while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
      const auto& nd = nodes_[static_cast<std::size_t>(node)];
      node = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes_[static_cast<std::size_t>(node)].value;
  }

 private:
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
  };

  int build(std::vector<std::vector<std::uint32_t>>& sorted, std::size_t depth,
            std::size_t min_leaf) {
    const std::size_t m = sorted[0].size();
    Node node;
    double sum = 0.0;
    for (auto i : sorted[0]) sum += targets_[i];
    node.value = sum / static_cast<double>(m);
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (depth == 0 || m < 2 * min_leaf) return self;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_score = min_gain_;  // required SSE improvement
    const double parent_score = sum * sum / static_cast<double>(m);
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      const auto& col = columns_[j];
      const auto& ord = sorted[j];
      double left_sum = 0.0;
      for (std::size_t r = 0; r + 1 < m; ++r) {
        left_sum += targets_[ord[r]];
        const std::size_t nl = r + 1, nr = m - nl;
        if (nl < min_leaf || nr < min_leaf || col[ord[r]] == col[ord[r + 1]]) {
          continue;
        }
        const double right_sum = sum - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(nl) +
                             right_sum * right_sum / static_cast<double>(nr) -
                             parent_score;
        if (score > best_score) {
          best_score = score;
          best_feature = static_cast<int>(j);
          best_threshold = 0.5 * (col[ord[r]] + col[ord[r + 1]]);
        }
      }
    }
    if (best_feature < 0) return self;

    // Stable partition of every feature's sorted list.
    const auto& split_col = columns_[static_cast<std::size_t>(best_feature)];
    std::vector<std::vector<std::uint32_t>> left_sorted(sorted.size()),
        right_sorted(sorted.size());
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      left_sorted[j].reserve(m);
      right_sorted[j].reserve(m);
      for (auto i : sorted[j]) {
        (split_col[i] <= best_threshold ? left_sorted[j] : right_sorted[j])
            .push_back(i);
      }
      sorted[j].clear();
      sorted[j].shrink_to_fit();
    }
    const int left = build(left_sorted, depth - 1, min_leaf);
    const int right = build(right_sorted, depth - 1, min_leaf);
    nodes_[static_cast<std::size_t>(self)].feature = best_feature;
    nodes_[static_cast<std::size_t>(self)].threshold = best_threshold;
    nodes_[static_cast<std::size_t>(self)].left = left;
    nodes_[static_cast<std::size_t>(self)].right = right;
    return self;
  }

  static constexpr double kComplexity = 0.01;

  std::vector<std::vector<double>> columns_;  // only during construction
  std::vector<double> targets_;
  std::vector<Node> nodes_;
  double min_gain_ = 1e-12;
  int root_ = 0;
};

inline LearnerPtr fit_learner(LearnerKind kind, const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& y, LossKind loss,
                              bool first_is_binary, const LearnerConfig& cfg) {
  switch (kind) {
    case LearnerKind::kConstantMean:
      return std::make_shared<ConstantMeanLearner>(x, y, first_is_binary);
    case LearnerKind::kLinearMain:
      return std::make_shared<LinearBasisLearner>(BasisKind::kMain, x, y, loss,
                                                  first_is_binary, cfg);
    case LearnerKind::kLinearInteraction:
      return std::make_shared<LinearBasisLearner>(BasisKind::kInteraction, x, y,
                                                  loss, first_is_binary, cfg);
    case LearnerKind::kRegressionTree:
      return std::make_shared<RegressionTreeLearner>(x, y, cfg);
    case LearnerKind::kSplineAdditive:
      return std::make_shared<LinearBasisLearner>(BasisKind::kSpline, x, y, loss,
                                                  first_is_binary, cfg);
  }
  throw std::logic_error("fit_learner: unreachable");
}

}  // namespace detail

/// Cross-validated convex ensemble over the candidate library.
class SuperLearnerFit {
 public:
  SuperLearnerFit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, LossKind loss,
                  bool first_is_binary, const FoldAssignment& folds,
                  const LearnerConfig& cfg) {
    const std::size_t n = static_cast<std::size_t>(x.rows());
    const std::size_t k = cfg.library.size();
    if (k == 0) throw std::invalid_argument("SuperLearnerFit: empty library");
    if (folds.fold_of.size() != n) {
      throw std::invalid_argument("SuperLearnerFit: fold assignment size mismatch");
    }
    Eigen::MatrixXd cv_pred(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
    for (std::size_t v = 0; v < folds.num_folds; ++v) {
      std::vector<std::size_t> train, val;
      for (std::size_t i = 0; i < n; ++i) {
        (folds.fold_of[i] == v ? val : train).push_back(i);
      }
      if (train.empty() || val.empty()) continue;
      Eigen::MatrixXd xt(static_cast<Eigen::Index>(train.size()), x.cols());
      Eigen::VectorXd yt(static_cast<Eigen::Index>(train.size()));
      for (std::size_t r = 0; r < train.size(); ++r) {
        xt.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(train[r]));
        yt[static_cast<Eigen::Index>(r)] = y[static_cast<Eigen::Index>(train[r])];
      }
      std::vector<double> raw(static_cast<std::size_t>(x.cols()));
      for (std::size_t c = 0; c < k; ++c) {
        const auto fit =
            detail::fit_learner(cfg.library[c], xt, yt, loss, first_is_binary, cfg);
        for (auto i : val) {
          for (Eigen::Index j = 0; j < x.cols(); ++j)
            raw[static_cast<std::size_t>(j)] = x(static_cast<Eigen::Index>(i), j);
          cv_pred(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) =
              clip_for_loss(fit->predict(raw.data(), raw.size()), loss);
        }
      }
    }
    weights_ = solve_simplex_weights(cv_pred, y, loss);
    cv_loss_ = detail::empirical_loss(combined(cv_pred, weights_), y, loss);
    cv_predictions_ = std::move(cv_pred);
    members_.reserve(k);
    for (std::size_t c = 0; c < k; ++c) {
      members_.push_back(
          detail::fit_learner(cfg.library[c], x, y, loss, first_is_binary, cfg));
    }
    loss_ = loss;
  }

  double predict(const double* x, std::size_t p) const {
    double acc = 0.0;
    for (std::size_t c = 0; c < members_.size(); ++c) {
      if (weights_.weights[c] == 0.0) continue;
      acc += weights_.weights[c] *
             clip_for_loss(members_[c]->predict(x, p), loss_);
    }
    return acc;
  }

  const EnsembleWeights& weights() const { return weights_; }
  double cv_loss() const { return cv_loss_; }
  const Eigen::MatrixXd& cv_predictions() const { return cv_predictions_; }

 private:
  static double clip_for_loss(double v, LossKind loss) {
    return loss == LossKind::kLogLikelihood
               ? clamp(v, OutcomeRegressionFn::kLowerClamp,
                       OutcomeRegressionFn::kUpperClamp)
               : v;
  }

  static Eigen::VectorXd combined(const Eigen::MatrixXd& preds,
                                  const EnsembleWeights& w) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(preds.cols());
    for (Eigen::Index j = 0; j < preds.rows(); ++j) {
      c += w.weights[static_cast<std::size_t>(j)] * preds.row(j).transpose();
    }
    return c;
  }

  std::vector<LearnerPtr> members_;
  EnsembleWeights weights_;
  Eigen::MatrixXd cv_predictions_;
  double cv_loss_ = 0.0;
  LossKind loss_ = LossKind::kSquaredError;
};

/// Super-learner outcome regression with Bernoulli log-likelihood loss.
/// The first design column is the treatment indicator.
inline OutcomeRegressionFn fit_outcome_regression(const Dataset& data,
                                                  const FoldAssignment& folds,
                                                  const LearnerConfig& cfg = {}) {
  if (data.empty()) throw std::invalid_argument("fit_outcome_regression: empty data");
  bool has0 = false, has1 = false;
  for (const auto& o : data.observations) (o.a == 1 ? has1 : has0) = true;
  if (!has0 || !has1) {
    throw std::runtime_error(
        "fit_outcome_regression: both treatment arms must be present");
  }
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d + 1));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    x(static_cast<Eigen::Index>(i), 0) = static_cast<double>(data[i].a);
    for (std::size_t j = 0; j < d; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = data[i].w[j];
    y[static_cast<Eigen::Index>(i)] = data[i].y;
  }
  auto fit = std::make_shared<SuperLearnerFit>(x, y, LossKind::kLogLikelihood, true,
                                               folds, cfg);
  return OutcomeRegressionFn([fit, d](int a, const CovariateVector& w) {
    thread_local std::vector<double> feat;
    feat.assign(1, static_cast<double>(a));
    feat.insert(feat.end(), w.begin(), w.end());
    return fit->predict(feat.data(), d + 1);
  });
}

/// Doubly robust pseudo-outcome whose conditional mean is the blip:
///   D = (2a-1)/g(a|w) * (y - Q(a,w)) + Q(1,w) - Q(0,w).
inline double dr_pseudo_outcome(const Observation& obs, const OutcomeRegressionFn& q,
                                const PropensityFn& g) {
  const double ga = g(obs.a, obs.w);
  return (2.0 * obs.a - 1.0) / ga * (obs.y - q(obs.a, obs.w)) + q(1, obs.w) -
         q(0, obs.w);
}

/// Super-learner blip regression: DR pseudo-outcomes on W under squared
/// error loss, output truncated to [-1, 1] by the BlipFn wrapper.
inline BlipFn fit_blip(const Dataset& data, const OutcomeRegressionFn& q,
                       const PropensityFn& g, const FoldAssignment& folds,
                       const LearnerConfig& cfg = {}) {
  if (data.empty()) throw std::invalid_argument("fit_blip: empty data");
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::VectorXd target(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i].w[j];
    target[static_cast<Eigen::Index>(i)] = dr_pseudo_outcome(data[i], q, g);
  }
  auto fit = std::make_shared<SuperLearnerFit>(x, target, LossKind::kSquaredError,
                                               false, folds, cfg);
  return BlipFn([fit, d](const CovariateVector& w) {
    return fit->predict(w.data(), d);
  });
}

}  // namespace subgroup
