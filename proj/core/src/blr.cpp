#include "subprobe/blr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "subprobe/errors.hpp"

namespace subprobe::blr {

namespace {

constexpr double kProbabilityClamp = 1e-12;
constexpr double kGammaTolerance = 1e-6;

std::string format_e17(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17e", value);
  return buffer;
}

Eigen::VectorXd standardized(const BoostedModel& model,
                             const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (model.standardizer.mean.size() == 0) return x;
  if (x.size() != model.standardizer.mean.size()) {
    throw DataError("feature vector length " + std::to_string(x.size()) +
                    " does not match standardizer length " +
                    std::to_string(model.standardizer.mean.size()));
  }
  return model.standardizer.apply(x);
}

// Ridge least squares against a shared design matrix; the factorization is
// reused across boosting rounds, only the right-hand side changes. The bias
// column is handled by centering, which leaves it unpenalized.
class RidgeSolver {
 public:
  RidgeSolver(const Eigen::Ref<const Eigen::MatrixXd>& X, double ridge_lambda)
      : lambda_(ridge_lambda) {
    const Eigen::Index n = X.rows();
    const Eigen::Index k = X.cols();
    if (lambda_ < 0.0) throw ConfigError("ridge penalty must be >= 0");

    if (lambda_ == 0.0) {
      // Minimum-norm least squares on the bias-augmented system.
      Eigen::MatrixXd augmented(n, k + 1);
      augmented.leftCols(k) = X;
      augmented.col(k).setOnes();
      cod_.compute(augmented);
      return;
    }

    col_mean_ = X.colwise().mean();
    centered_ = X.rowwise() - col_mean_;
    dual_ = n <= k;
    if (dual_) {
      Eigen::MatrixXd gram = centered_ * centered_.transpose();
      gram.diagonal().array() += lambda_;
      llt_.compute(gram);
    } else {
      Eigen::MatrixXd gram = centered_.transpose() * centered_;
      gram.diagonal().array() += lambda_;
      llt_.compute(gram);
    }
    if (llt_.info() != Eigen::Success) {
      throw NumericError("ridge system factorization failed");
    }
  }

  Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& residuals) const {
    if (lambda_ == 0.0) {
      Eigen::VectorXd w = cod_.solve(residuals);
      if (!w.allFinite()) throw NumericError("least-squares solve produced non-finite weights");
      return w;
    }
    const double r_mean = residuals.mean();
    Eigen::VectorXd r_centered = residuals;
    r_centered.array() -= r_mean;
    Eigen::VectorXd v;
    if (dual_) {
      v = centered_.transpose() * llt_.solve(r_centered);
    } else {
      v = llt_.solve(centered_.transpose() * r_centered);
    }
    if (!v.allFinite()) throw NumericError("ridge solve produced non-finite weights");
    Eigen::VectorXd w(v.size() + 1);
    w.head(v.size()) = v;
    w[v.size()] = r_mean - col_mean_.dot(v);
    return w;
  }

 private:
  double lambda_;
  bool dual_ = false;
  Eigen::RowVectorXd col_mean_;
  Eigen::MatrixXd centered_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_;
};

}  // namespace

double decision_value(const BoostedModel& model,
                      const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (model.rounds.empty()) return 0.0;
  const Eigen::VectorXd xs = standardized(model, x);
  double score = 0.0;
  for (const auto& round : model.rounds) {
    if (round.learner.w.size() != xs.size() + 1) {
      throw DataError("feature vector length " + std::to_string(xs.size()) +
                      " does not match weak learner length " +
                      std::to_string(round.learner.w.size()));
    }
    score += round.gamma * round.learner.eval(xs);
  }
  return score;
}

Eigen::VectorXd decision_values(const BoostedModel& model,
                                const Eigen::Ref<const Eigen::MatrixXd>& X) {
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(X.rows());
  if (model.rounds.empty()) return scores;

  Eigen::MatrixXd Xs;
  if (model.standardizer.mean.size() > 0) {
    if (X.cols() != model.standardizer.mean.size()) {
      throw DataError("feature matrix width " + std::to_string(X.cols()) +
                      " does not match standardizer length " +
                      std::to_string(model.standardizer.mean.size()));
    }
    Xs = (X.rowwise() - model.standardizer.mean.transpose()) *
         model.standardizer.scale.asDiagonal();
  } else {
    Xs = X;
  }
  for (const auto& round : model.rounds) {
    const auto& w = round.learner.w;
    if (w.size() != Xs.cols() + 1) {
      throw DataError("feature matrix width " + std::to_string(Xs.cols()) +
                      " does not match weak learner length " + std::to_string(w.size()));
    }
    scores.noalias() += round.gamma * (Xs * w.head(w.size() - 1));
    scores.array() += round.gamma * w[w.size() - 1];
  }
  return scores;
}

double posterior_from_score(double f) {
  // 1 / (1 + exp(-2F)), with the exponential always taken of a non-positive
  // argument so it cannot overflow.
  if (f >= 0.0) {
    return 1.0 / (1.0 + std::exp(-2.0 * f));
  }
  const double e = std::exp(2.0 * f);
  return e / (1.0 + e);
}

double posterior(const BoostedModel& model,
                 const Eigen::Ref<const Eigen::VectorXd>& x) {
  return posterior_from_score(decision_value(model, x));
}

double log_likelihood_from_scores(const Eigen::Ref<const Eigen::VectorXd>& scores,
                                  const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (scores.size() == 0) throw DataError("log-likelihood of an empty dataset");
  if (scores.size() != y.size()) {
    throw DataError("score/label length mismatch");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(posterior_from_score(scores[i]), kProbabilityClamp,
                                1.0 - kProbabilityClamp);
    total += y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return total;
}

double log_likelihood(const BoostedModel& model, const signal::LabeledDataset& data) {
  if (data.n_rows() == 0) throw DataError("log-likelihood of an empty dataset");
  return log_likelihood_from_scores(decision_values(model, data.X), data.y);
}

WeakLearner fit_weak_learner(const Eigen::Ref<const Eigen::MatrixXd>& X,
                             const Eigen::Ref<const Eigen::VectorXd>& residuals,
                             double ridge_lambda) {
  if (X.rows() != residuals.size()) {
    throw DataError("design matrix has " + std::to_string(X.rows()) +
                    " rows but " + std::to_string(residuals.size()) + " residuals");
  }
  if (residuals.size() == 0) throw DataError("cannot fit to an empty system");
  if (residuals.isZero(0.0)) {
    return WeakLearner{Eigen::VectorXd::Zero(X.cols() + 1)};
  }
  return WeakLearner{RidgeSolver(X, ridge_lambda).solve(residuals)};
}

double line_search_gamma(const Eigen::Ref<const Eigen::VectorXd>& y,
                         const Eigen::Ref<const Eigen::VectorXd>& scores_prev,
                         const Eigen::Ref<const Eigen::VectorXd>& scores_new,
                         double gamma_max) {
  if (y.size() != scores_prev.size() || y.size() != scores_new.size()) {
    throw DataError("line search vector length mismatch");
  }
  if (gamma_max < 0.0) throw ConfigError("gamma_max must be >= 0");
  if (gamma_max == 0.0 || scores_new.lpNorm<Eigen::Infinity>() == 0.0) {
    return 0.0;
  }

  const auto objective = [&](double gamma) {
    return log_likelihood_from_scores(scores_prev + gamma * scores_new, y);
  };

  // Golden-section search for the maximum; the objective is concave in gamma.
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0;
  double b = gamma_max;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  while (b - a > kGammaTolerance) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = objective(d);
    }
  }

  // Snap to whichever of {0, interior, gamma_max} scores best, preferring the
  // smaller gamma on ties; this returns the exact endpoint when the
  // objective is monotone over the interval.
  double best_gamma = 0.0;
  double best_value = objective(0.0);
  for (const double candidate : {0.5 * (a + b), gamma_max}) {
    const double value = objective(candidate);
    if (value > best_value) {
      best_value = value;
      best_gamma = candidate;
    }
  }
  return best_gamma;
}

BoostedModel train(const signal::LabeledDataset& data, const TrainConfig& config,
                   TrainTrace* trace) {
  const Eigen::Index n = data.n_rows();
  const Eigen::Index k = data.X.cols();
  if (n == 0) throw DataError("cannot train on an empty dataset");
  if (data.y.size() != n) throw DataError("dataset label count mismatch");
  if (config.rounds < 0) throw ConfigError("round count must be >= 0");
  const double positives = data.y.sum();
  if (positives == 0.0 || positives == static_cast<double>(n)) {
    throw DataError("training data must contain both classes");
  }

  BoostedModel model;
  model.feature_dim = k;
  model.ridge_lambda = config.ridge_lambda;
  model.gamma_max = config.gamma_max;
  model.preprocessing_fingerprint = config.preprocessing_fingerprint;

  model.standardizer.mean = data.X.colwise().mean().transpose();
  model.standardizer.scale.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double var =
        (data.X.col(j).array() - model.standardizer.mean[j]).square().mean();
    const double sd = std::sqrt(var);
    model.standardizer.scale[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }

  const Eigen::MatrixXd Xs =
      (data.X.rowwise() - model.standardizer.mean.transpose()) *
      model.standardizer.scale.asDiagonal();
  const RidgeSolver solver(Xs, config.ridge_lambda);

  Eigen::VectorXd scores = Eigen::VectorXd::Zero(n);
  if (trace != nullptr) {
    trace->log_likelihood.clear();
    trace->gamma.clear();
  }
  for (int m = 0; m < config.rounds; ++m) {
    Eigen::VectorXd gradient(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      gradient[i] = 2.0 * (data.y[i] - posterior_from_score(scores[i]));
    }
    WeakLearner learner{solver.solve(gradient)};
    Eigen::VectorXd weak_scores = Xs * learner.w.head(k);
    weak_scores.array() += learner.w[k];
    const double gamma =
        line_search_gamma(data.y, scores, weak_scores, config.gamma_max);
    scores += gamma * weak_scores;
    model.rounds.push_back(BoostedRound{gamma, std::move(learner)});
    if (trace != nullptr) {
      trace->log_likelihood.push_back(log_likelihood_from_scores(scores, data.y));
      trace->gamma.push_back(gamma);
    }
  }
  return model;
}

namespace {

void write_vector(std::ostream& out, const char* key,
                  const Eigen::VectorXd& values) {
  out << key;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    out << ' ' << format_e17(values[i]);
  }
  out << '\n';
}

Eigen::VectorXd parse_vector(std::istringstream& row, Eigen::Index expected,
                             const std::string& what) {
  Eigen::VectorXd values(expected);
  for (Eigen::Index i = 0; i < expected; ++i) {
    if (!(row >> values[i])) {
      throw IoError("model file: " + what + " has fewer than " +
                    std::to_string(expected) + " entries");
    }
  }
  double extra = 0.0;
  if (row >> extra) {
    throw IoError("model file: " + what + " has more than " +
                  std::to_string(expected) + " entries");
  }
  return values;
}

}  // namespace

void save_model(const BoostedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "subprobe-blr v1\n";
  out << "feature_dim " << model.feature_dim << '\n';
  out << "fingerprint " << model.preprocessing_fingerprint << '\n';
  out << "lambda " << format_e17(model.ridge_lambda) << '\n';
  out << "gamma_max " << format_e17(model.gamma_max) << '\n';
  if (model.standardizer.mean.size() > 0) {
    write_vector(out, "standardizer_mean", model.standardizer.mean);
    write_vector(out, "standardizer_scale", model.standardizer.scale);
  }
  out << "rounds " << model.rounds.size() << '\n';
  for (const auto& round : model.rounds) {
    out << "gamma " << format_e17(round.gamma) << '\n';
    write_vector(out, "weights", round.learner.w);
  }
  if (!out) throw IoError("failed writing model to '" + path + "'");
}

BoostedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "subprobe-blr v1") {
    throw IoError("'" + path + "' is not a model file");
  }

  BoostedModel model;
  model.preprocessing_fingerprint = 0;
  std::size_t expected_rounds = 0;
  bool have_rounds_line = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string key;
    row >> key;
    if (key == "feature_dim") {
      row >> model.feature_dim;
    } else if (key == "fingerprint") {
      row >> model.preprocessing_fingerprint;
    } else if (key == "lambda") {
      row >> model.ridge_lambda;
    } else if (key == "gamma_max") {
      row >> model.gamma_max;
    } else if (key == "standardizer_mean") {
      model.standardizer.mean = parse_vector(row, model.feature_dim, key);
      continue;
    } else if (key == "standardizer_scale") {
      model.standardizer.scale = parse_vector(row, model.feature_dim, key);
      continue;
    } else if (key == "rounds") {
      row >> expected_rounds;
      have_rounds_line = true;
    } else if (key == "gamma") {
      BoostedRound round;
      row >> round.gamma;
      if (row.fail()) throw IoError("model file: malformed gamma line");
      if (!std::getline(in, line)) {
        throw IoError("model file: gamma line without weights");
      }
      std::istringstream weights_row(line);
      weights_row >> key;
      if (key != "weights") {
        throw IoError("model file: expected weights after gamma, got '" + key + "'");
      }
      round.learner.w = parse_vector(weights_row, model.feature_dim + 1, key);
      model.rounds.push_back(std::move(round));
      continue;
    } else {
      throw IoError("model file: unknown field '" + key + "'");
    }
    if (row.fail()) throw IoError("model file: malformed line '" + line + "'");
  }
  if (!have_rounds_line || model.rounds.size() != expected_rounds) {
    throw IoError("model file: round count mismatch");
  }
  if (model.standardizer.mean.size() != model.standardizer.scale.size()) {
    throw IoError("model file: standardizer vectors have different lengths");
  }
  return model;
}

}  // namespace subprobe::blr
