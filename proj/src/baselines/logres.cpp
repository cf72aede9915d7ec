#include "baselines/logres.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "common/error.hpp"
#include "numerics/rng.hpp"

namespace clinbench::baselines {

using nlohmann::json;

Design make_design(const data::Cohort& cohort, const data::CohortSchema& schema) {
  Design d;
  d.rows = cohort.size();
  std::vector<std::size_t> offsets;
  for (std::size_t v : schema.vocab_sizes()) {
    offsets.push_back(d.cols);
    d.cols += v;
  }
  const std::size_t cont0 = d.cols;
  d.cols += schema.continuous_count();
  d.x.assign(d.rows * d.cols, 0.0);
  for (std::size_t i = 0; i < d.rows; ++i) {
    const auto& r = cohort[i];
    double* row = d.x.data() + i * d.cols;
    for (std::size_t j = 0; j < r.categorical.size(); ++j) row[offsets[j] + static_cast<std::size_t>(r.categorical[j])] = 1.0;
    for (std::size_t j = 0; j < r.continuous.size(); ++j) row[cont0 + j] = r.continuous[j];
    d.y.push_back(r.bor);
  }
  return d;
}

json LogResModel::to_json() const { return {{"weights", weights}, {"bias", bias}, {"l2", l2}}; }

LogResModel LogResModel::from_json(const json& doc) {
  LogResModel m;
  try {
    m.weights = doc.at("weights").get<std::vector<double>>();
    m.bias = doc.at("bias").get<double>();
    m.l2 = doc.at("l2").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("logistic regression model: ") + e.what());
  }
  return m;
}

namespace {

double margin(const LogResModel& m, const Design& d, std::size_t i) {
  const double* row = d.x.data() + i * d.cols;
  double z = m.bias;
  for (std::size_t j = 0; j < d.cols; ++j) z += m.weights[j] * row[j];
  return z;
}

/// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double mean_nll(const LogResModel& m, const Design& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.rows; ++i) {
    const double z = margin(m, d, i);
    s += d.y[i] == 1 ? softplus(-z) : softplus(z);
  }
  return s / static_cast<double>(d.rows);
}

void check_classes(const std::vector<int>& y) {
  const auto pos = std::count(y.begin(), y.end(), 1);
  require(pos > 0 && static_cast<std::size_t>(pos) < y.size(), ErrorKind::Fit,
          "logistic regression needs both responders and non-responders");
}

Design rows_of(const Design& d, const std::vector<std::size_t>& idx) {
  Design out;
  out.rows = idx.size();
  out.cols = d.cols;
  for (std::size_t i : idx) {
    out.x.insert(out.x.end(), d.x.begin() + static_cast<std::ptrdiff_t>(i * d.cols),
                 d.x.begin() + static_cast<std::ptrdiff_t>((i + 1) * d.cols));
    out.y.push_back(d.y[i]);
  }
  return out;
}

}  // namespace

double lr_objective(const LogResModel& m, const Design& d) {
  double w2 = 0.0;
  for (double w : m.weights) w2 += w * w;
  return mean_nll(m, d) + 0.5 * m.l2 * w2;
}

LogResModel lr_fit(const Design& d, const LogResConfig& config, std::vector<double>* trace) {
  require(config.l2 >= 0.0 && std::isfinite(config.l2), ErrorKind::Validation, "l2 must be finite and nonnegative");
  require(config.lr > 0.0 && config.epochs > 0, ErrorKind::Validation, "learning rate and epochs must be positive");
  require(d.rows > 0, ErrorKind::Fit, "logistic regression on an empty cohort");
  check_classes(d.y);
  LogResModel m;
  m.weights.assign(d.cols, 0.0);
  m.l2 = config.l2;
  std::vector<double> g(d.cols);
  const double inv_n = 1.0 / static_cast<double>(d.rows);
  const double shrink = 1.0 / (1.0 + config.lr * config.l2);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (trace) trace->push_back(lr_objective(m, d));
    std::fill(g.begin(), g.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < d.rows; ++i) {
      const double r = (sigmoid(margin(m, d, i)) - d.y[i]) * inv_n;
      const double* row = d.x.data() + i * d.cols;
      for (std::size_t j = 0; j < d.cols; ++j) g[j] += r * row[j];
      gb += r;
    }
    for (std::size_t j = 0; j < d.cols; ++j) m.weights[j] = (m.weights[j] - config.lr * g[j]) * shrink;
    m.bias -= config.lr * gb;
  }
  if (trace) trace->push_back(lr_objective(m, d));
  return m;
}

LogResModel lr_fit(const data::Cohort& cohort, const data::CohortSchema& schema, const LogResConfig& config) {
  return lr_fit(make_design(cohort, schema), config);
}

std::vector<double> lr_predict(const LogResModel& m, const Design& d) {
  require(m.weights.size() == d.cols, ErrorKind::Dimension,
          "model has " + std::to_string(m.weights.size()) + " weights, design has " + std::to_string(d.cols) + " columns");
  std::vector<double> p(d.rows);
  for (std::size_t i = 0; i < d.rows; ++i) p[i] = sigmoid(margin(m, d, i));
  return p;
}

GridResult lr_fit_grid(const data::Cohort& cohort, const data::CohortSchema& schema, std::uint64_t seed,
                       const std::vector<double>& grid, LogResConfig base) {
  require(!grid.empty(), ErrorKind::Validation, "empty l2 grid");
  const Design d = make_design(cohort, schema);
  check_classes(d.y);

  // Stratified fold assignment: shuffle each class, then deal round-robin.
  const std::size_t folds = std::min<std::size_t>(5, d.rows);
  std::vector<std::size_t> fold_of(d.rows);
  numerics::CounterRng rng = numerics::CounterRng(seed).fork(0x4C52);
  std::size_t dealt = 0;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < d.rows; ++i)
      if (d.y[i] == cls) idx.push_back(i);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    for (std::size_t i : idx) fold_of[i] = dealt++ % folds;
  }

  GridResult out;
  out.grid = grid;
  std::size_t best = 0;
  double best_nll = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double total = 0.0;
    std::size_t scored = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<std::size_t> tr, va;
      for (std::size_t i = 0; i < d.rows; ++i) (fold_of[i] == f ? va : tr).push_back(i);
      const Design dtr = rows_of(d, tr);
      if (va.empty() || std::count(dtr.y.begin(), dtr.y.end(), 1) == 0 ||
          std::count(dtr.y.begin(), dtr.y.end(), 0) == 0)
        continue;
      LogResConfig c = base;
      c.l2 = grid[g];
      LogResModel m = lr_fit(dtr, c);
      m.l2 = 0.0;
      total += mean_nll(m, rows_of(d, va)) * static_cast<double>(va.size());
      scored += va.size();
    }
    const double nll = scored ? total / static_cast<double>(scored) : std::numeric_limits<double>::quiet_NaN();
    out.validation_nll.push_back(nll);
    if (scored && nll < best_nll) {
      best_nll = nll;
      best = g;
    }
  }
  // No scorable fold (tiny cohorts): fall back to the strongest penalty.
  if (!std::isfinite(best_nll)) best = static_cast<std::size_t>(std::max_element(grid.begin(), grid.end()) - grid.begin());
  base.l2 = grid[best];
  out.model = lr_fit(d, base);
  return out;
}

metrics::Predictions lr_predictions(const LogResModel& m, const data::Cohort& cohort, const data::CohortSchema& schema) {
  metrics::Predictions p;
  p.responder_prob = lr_predict(m, make_design(cohort, schema));
  for (double v : p.responder_prob) {
    p.risk_os.push_back(1.0 - v);
    p.risk_pfs.push_back(1.0 - v);
  }
  return p;
}

}  // namespace clinbench::baselines
