#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "subprobe/signal.hpp"

namespace subprobe::blr {

// One linear scorer w'x + b; the bias lives in the last slot.
struct WeakLearner {
  Eigen::VectorXd w;  // length K + 1

  double eval(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return w.head(w.size() - 1).dot(x) + w[w.size() - 1];
  }
};

struct BoostedRound {
  double gamma = 0.0;
  WeakLearner learner;
};

// Per-dimension affine map fitted on the training set and replayed at test
// time; ridge shrinkage is only meaningful on comparable scales.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // multiplicative, 1/std (capped for constant dims)

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return (x - mean).cwiseProduct(scale);
  }
};

struct BoostedModel {
  Eigen::Index feature_dim = 0;
  Standardizer standardizer;
  double ridge_lambda = 1.0;
  double gamma_max = 4.0;
  std::uint64_t preprocessing_fingerprint = 0;
  std::vector<BoostedRound> rounds;
};

// F(x) = sum_m gamma_m * (w_m . [x~; 1]) on the standardized features.
double decision_value(const BoostedModel& model,
                      const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd decision_values(const BoostedModel& model,
                                const Eigen::Ref<const Eigen::MatrixXd>& X);

// p(y=1|x) = exp(F) / (exp(F) + exp(-F)) = 1 / (1 + exp(-2F)), evaluated
// without overflow for any finite F.
double posterior_from_score(double f);
double posterior(const BoostedModel& model,
                 const Eigen::Ref<const Eigen::VectorXd>& x);

// Bernoulli log-likelihood sum_i [y_i ln p_i + (1-y_i) ln(1-p_i)] with
// probabilities clamped to [1e-12, 1 - 1e-12].
double log_likelihood_from_scores(const Eigen::Ref<const Eigen::VectorXd>& scores,
                                  const Eigen::Ref<const Eigen::VectorXd>& y);
double log_likelihood(const BoostedModel& model, const signal::LabeledDataset& data);

// argmin_w sum_i (r_i - w.[x_i;1])^2 + lambda |w|^2 with the bias
// unpenalized; minimum-norm solution when lambda = 0 and the system is
// underdetermined.
WeakLearner fit_weak_learner(const Eigen::Ref<const Eigen::MatrixXd>& X,
                             const Eigen::Ref<const Eigen::VectorXd>& residuals,
                             double ridge_lambda);

// gamma maximizing the log-likelihood of scores_prev + gamma * scores_new
// over [0, gamma_max]; the objective is concave, so a scalar golden-section
// search (absolute tolerance 1e-6) finds the global optimum. A flat
// objective resolves to 0.
double line_search_gamma(const Eigen::Ref<const Eigen::VectorXd>& y,
                         const Eigen::Ref<const Eigen::VectorXd>& scores_prev,
                         const Eigen::Ref<const Eigen::VectorXd>& scores_new,
                         double gamma_max);

struct TrainConfig {
  int rounds = 10;
  double ridge_lambda = 1.0;
  double gamma_max = 4.0;
  std::uint64_t preprocessing_fingerprint = 0;
};

// Per-round training diagnostics; log_likelihood[m] is the training
// likelihood after round m+1 has been appended.
struct TrainTrace {
  std::vector<double> log_likelihood;
  std::vector<double> gamma;
};

// Functional gradient boosting: each round fits a ridge least-squares weak
// learner to the per-sample likelihood gradient 2(y_i - p_i), then picks its
// weight by line search. Needs both classes present.
BoostedModel train(const signal::LabeledDataset& data, const TrainConfig& config,
                   TrainTrace* trace = nullptr);

// Structured-text serialization, 17 significant digits throughout.
void save_model(const BoostedModel& model, const std::string& path);
BoostedModel load_model(const std::string& path);

}  // namespace subprobe::blr
