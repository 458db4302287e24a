#include "dpbound/empirical.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dpbound {

WeightedSamples WeightedSamples::uniform(Eigen::MatrixXd pts) {
  WeightedSamples ws;
  const auto n = pts.rows();
  if (n == 0) throw std::invalid_argument("WeightedSamples: empty point set");
  ws.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  ws.points = std::move(pts);
  return ws;
}

void validate(const WeightedSamples& ws) {
  if (ws.points.rows() == 0) throw std::invalid_argument("WeightedSamples: empty point set");
  if (ws.weights.size() != ws.points.rows())
    throw std::invalid_argument("WeightedSamples: weight/point count mismatch");
  if ((ws.weights.array() < -1e-12).any())
    throw std::invalid_argument("WeightedSamples: negative weight");
  if (std::abs(ws.weights.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("WeightedSamples: weights do not sum to 1");
}

WeightedSamples marginal(const WeightedSamples& ws, const std::vector<int>& columns) {
  if (columns.empty()) throw std::invalid_argument("marginal: empty column list");
  WeightedSamples out;
  out.points.resize(ws.points.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    int c = columns[j];
    if (c < 0 || c >= ws.points.cols())
      throw std::invalid_argument("marginal: column index out of range");
    out.points.col(static_cast<Eigen::Index>(j)) = ws.points.col(c);
  }
  out.weights = ws.weights;
  return out;
}

WeightedSamples marginal(const WeightedSamples& ws, const SignalRoute& route) {
  return marginal(ws, route.columns);
}

double mmd_biased_sq(const KernelSpec& k, const WeightedSamples& P,
                     const WeightedSamples& Q) {
  if (P.dim() != Q.dim()) throw std::invalid_argument("mmd: dimension mismatch");
  const Eigen::MatrixXd Kpp = gram(k, P.points, P.points);
  const Eigen::MatrixXd Kpq = gram(k, P.points, Q.points);
  const Eigen::MatrixXd Kqq = gram(k, Q.points, Q.points);
  double m2 = P.weights.dot(Kpp * P.weights) - 2.0 * P.weights.dot(Kpq * Q.weights) +
              Q.weights.dot(Kqq * Q.weights);
  return std::max(m2, 0.0);
}

double mmd_biased(const KernelSpec& k, const WeightedSamples& P,
                  const WeightedSamples& Q) {
  return std::sqrt(mmd_biased_sq(k, P, Q));
}

double mmd_unbiased(const KernelSpec& k, const WeightedSamples& P,
                    const WeightedSamples& Q) {
  if (P.dim() != Q.dim()) throw std::invalid_argument("mmd: dimension mismatch");
  const int n = P.size(), m = Q.size();
  if (n < 2 || m < 2)
    throw std::invalid_argument("mmd_unbiased: needs >= 2 points per set");
  auto uniformity = [](const Eigen::VectorXd& w) {
    return (w.array() - w.mean()).abs().maxCoeff() <= 1e-12;
  };
  if (!uniformity(P.weights) || !uniformity(Q.weights))
    throw std::invalid_argument("mmd_unbiased: weights must be uniform");

  const Eigen::MatrixXd Kpp = gram(k, P.points, P.points);
  const Eigen::MatrixXd Kpq = gram(k, P.points, Q.points);
  const Eigen::MatrixXd Kqq = gram(k, Q.points, Q.points);
  double spp = (Kpp.sum() - Kpp.trace()) / (static_cast<double>(n) * (n - 1));
  double sqq = (Kqq.sum() - Kqq.trace()) / (static_cast<double>(m) * (m - 1));
  double spq = (n == m) ? (Kpq.sum() - Kpq.trace()) / (static_cast<double>(n) * (n - 1))
                        : Kpq.sum() / (static_cast<double>(n) * m);
  double m2 = spp - 2.0 * spq + sqq;
  return (m2 >= 0 ? 1.0 : -1.0) * std::sqrt(std::abs(m2));
}

void write_csv(const WeightedSamples& ws, std::ostream& out) {
  out.precision(17);
  for (int i = 0; i < ws.size(); ++i) {
    for (int j = 0; j < ws.dim(); ++j) out << ws.points(i, j) << ',';
    out << ws.weights[i] << '\n';
  }
}

WeightedSamples read_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument("read_csv: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().size() < 2)
    throw std::invalid_argument("read_csv: need at least one point column plus weight");
  WeightedSamples ws;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size() - 1);
  ws.points.resize(n, d);
  ws.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) ws.points(i, j) = rows[i][j];
    ws.weights[i] = rows[i][d];
  }
  return ws;
}

}  // namespace dpbound
