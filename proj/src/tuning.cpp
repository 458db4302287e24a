#include "dpbound/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "dpbound/rng.hpp"

namespace dpbound {

namespace {

void check_space(const TuningSpace& space) {
  if (space.empty())
    throw std::invalid_argument("lengthscale search space must not be empty");
  for (std::size_t d = 0; d < space.size(); ++d) {
    const double lo = space[d].first;
    const double hi = space[d].second;
    if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi))
      throw std::invalid_argument("lengthscale search range " +
                                  std::to_string(d) +
                                  " must satisfy 0 < lo <= hi < inf");
  }
}

TuningCandidate evaluate(const TuningPipeline& pipeline,
                         const Eigen::VectorXd& lengthscales, int index) {
  TuningCandidate cand;
  cand.index = index;
  cand.lengthscales = lengthscales;
  cand.f_max = std::numeric_limits<double>::quiet_NaN();
  try {
    const double value = pipeline(lengthscales);
    if (!std::isfinite(value)) {
      cand.status = "failed: non-finite F_max";
    } else if (value < 0.0 || value > 1.0) {
      cand.status = "failed: F_max outside [0, 1]";
    } else {
      cand.f_max = value;
      cand.ok = true;
      cand.status = "ok";
    }
  } catch (const std::exception& e) {
    cand.status = std::string("failed: ") + e.what();
  }
  return cand;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string quoted = "\"";
  for (char c : text) {
    quoted += c;
    if (c == '"') quoted += '"';
  }
  quoted += '"';
  return quoted;
}

}  // namespace

TuningSpace default_search_space(int parameters, double output_span) {
  if (parameters < 1)
    throw std::invalid_argument("search space needs at least one parameter");
  if (!(output_span > 0.0) || !std::isfinite(output_span))
    throw std::invalid_argument("output span must be positive and finite");
  TuningSpace space(static_cast<std::size_t>(parameters),
                    {1e-8, 5e3});
  space.back() = {1e-4 * output_span, 10.0 * output_span};
  return space;
}

TuningResult search_lengthscales(const TuningPipeline& pipeline,
                                 const TuningSpace& space,
                                 const TuningOptions& options) {
  check_space(space);
  if (options.budget < 1)
    throw std::invalid_argument("search budget must be at least 1");
  if (!pipeline)
    throw std::invalid_argument("search needs a callable pipeline");
  const int dim = static_cast<int>(space.size());
  Eigen::VectorXd log_lo(dim), log_hi(dim);
  for (int d = 0; d < dim; ++d) {
    log_lo[d] = std::log(space[d].first);
    log_hi[d] = std::log(space[d].second);
  }

  TuningResult result;
  int best = -1;
  auto record = [&](const Eigen::VectorXd& lengthscales) {
    const int index = static_cast<int>(result.trace.size());
    result.trace.push_back(evaluate(pipeline, lengthscales, index));
    const TuningCandidate& cand = result.trace.back();
    if (cand.ok && (best < 0 || cand.f_max < result.trace[best].f_max))
      best = index;
  };

  // Exploration half: initial candidates first, then log-uniform draws.
  const int exploration = (options.budget + 1) / 2;
  Rng rng(options.seed);
  for (const Eigen::VectorXd& candidate : options.initial_candidates) {
    if (static_cast<int>(result.trace.size()) >= options.budget) break;
    if (candidate.size() != dim)
      throw std::invalid_argument(
          "initial candidate dimension disagrees with the search space");
    record(candidate);
  }
  while (static_cast<int>(result.trace.size()) < exploration) {
    Eigen::VectorXd draw(dim);
    for (int d = 0; d < dim; ++d)
      draw[d] =
          std::exp(log_lo[d] + rng.uniform01() * (log_hi[d] - log_lo[d]));
    record(draw);
  }

  // Refinement half: axis-aligned log-space steps around the incumbent,
  // alternating direction per coordinate and halving after each full cycle.
  // With no incumbent yet (every exploration candidate failed) pivot on the
  // box center so the search keeps probing.
  Eigen::VectorXd step = 0.25 * (log_hi - log_lo);
  int move = 0;
  while (static_cast<int>(result.trace.size()) < options.budget) {
    if (move > 0 && move % (2 * dim) == 0) step *= 0.5;
    const int d = (move / 2) % dim;
    const double direction = (move % 2 == 0) ? 1.0 : -1.0;
    Eigen::VectorXd pivot =
        best >= 0
            ? result.trace[best].lengthscales.array().log().matrix().eval()
            : (0.5 * (log_lo + log_hi)).eval();
    pivot[d] =
        std::clamp(pivot[d] + direction * step[d], log_lo[d], log_hi[d]);
    record(pivot.array().exp().matrix());
    ++move;
  }

  if (best < 0)
    throw std::runtime_error(
        "lengthscale search failed: every candidate evaluation failed");
  result.best_lengthscales = result.trace[best].lengthscales;
  result.best_f_max = result.trace[best].f_max;
  return result;
}

void write_tuning_csv(const std::vector<TuningCandidate>& trace,
                      std::ostream& out) {
  out << "index,lengthscales,f_max,status\n";
  out.precision(17);
  for (const TuningCandidate& cand : trace) {
    out << cand.index << ',';
    for (Eigen::Index d = 0; d < cand.lengthscales.size(); ++d) {
      if (d > 0) out << ';';
      out << cand.lengthscales[d];
    }
    out << ',';
    if (cand.ok) out << cand.f_max;
    out << ',' << csv_field(cand.status) << '\n';
  }
}

}  // namespace dpbound
