#include "stmfem/time_basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "stmfem/quadrature.hpp"

namespace stmfem {

TimePartition::TimePartition(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 2) throw std::invalid_argument("TimePartition: need at least one interval");
  if (nodes_.front() != 0.0) throw std::invalid_argument("TimePartition: first node must be 0");
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (!(nodes_[i] > nodes_[i - 1])) {
      throw std::invalid_argument("TimePartition: nodes must be strictly increasing");
    }
  }
}

TimePartition TimePartition::uniform(double final_time, int intervals) {
  if (intervals < 1 || !(final_time > 0.0)) {
    throw std::invalid_argument("TimePartition::uniform: need T > 0 and N >= 1");
  }
  std::vector<double> nodes(intervals + 1);
  for (int i = 0; i <= intervals; ++i) nodes[i] = final_time * i / intervals;
  nodes.back() = final_time;
  return TimePartition(std::move(nodes));
}

double TimePartition::max_step() const {
  double tau = 0.0;
  for (int n = 1; n <= intervals(); ++n) tau = std::max(tau, step(n));
  return tau;
}

LagrangeBasis1D::LagrangeBasis1D(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  const int m = size();
  if (m == 0) throw std::invalid_argument("LagrangeBasis1D: empty node set");
  bary_.assign(m, 1.0);
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < m; ++k) {
      if (k == j) continue;
      const double d = nodes_[j] - nodes_[k];
      if (d == 0.0) throw std::invalid_argument("LagrangeBasis1D: repeated node");
      bary_[j] /= d;
    }
  }
}

void LagrangeBasis1D::values(double t, std::span<double> out) const {
  const int m = size();
  for (int k = 0; k < m; ++k) {
    if (t == nodes_[k]) {
      std::fill(out.begin(), out.end(), 0.0);
      out[k] = 1.0;
      return;
    }
  }
  // Second (true) barycentric form.
  double denom = 0.0;
  for (int k = 0; k < m; ++k) {
    out[k] = bary_[k] / (t - nodes_[k]);
    denom += out[k];
  }
  for (int k = 0; k < m; ++k) out[k] /= denom;
}

double LagrangeBasis1D::value(int j, double t) const {
  std::vector<double> v(size());
  values(t, v);
  return v.at(j);
}

double LagrangeBasis1D::derivative_at_node(int j, int i) const {
  const int m = size();
  if (j != i) return (bary_[j] / bary_[i]) / (nodes_[i] - nodes_[j]);
  double s = 0.0;
  for (int k = 0; k < m; ++k) {
    if (k != i) s -= (bary_[k] / bary_[i]) / (nodes_[i] - nodes_[k]);
  }
  return s;
}

void LagrangeBasis1D::derivatives(double t, std::span<double> out) const {
  const int m = size();
  for (int k = 0; k < m; ++k) {
    if (t == nodes_[k]) {
      for (int j = 0; j < m; ++j) out[j] = derivative_at_node(j, k);
      return;
    }
  }
  // phi_j'(t) = phi_j(t) * sum_{k != j} 1/(t - t_k), valid away from the nodes.
  values(t, out);
  double total = 0.0;
  for (int k = 0; k < m; ++k) total += 1.0 / (t - nodes_[k]);
  for (int j = 0; j < m; ++j) out[j] *= total - 1.0 / (t - nodes_[j]);
}

double LagrangeBasis1D::derivative(int j, double t) const {
  std::vector<double> d(size());
  derivatives(t, d);
  return d.at(j);
}

std::vector<double> TemporalBasis::endpoint_values() const {
  std::vector<double> v(r + 1);
  trial.values(1.0, v);
  return v;
}

TemporalBasis build_basis(int r) {
  if (r < 1 || r > kMaxTimeDegree) {
    throw std::invalid_argument("build_basis: r = " + std::to_string(r) + " outside [1, " +
                                std::to_string(kMaxTimeDegree) + "]");
  }
  const GaussRule1D gauss = gauss_legendre_unit(r);

  TemporalBasis b;
  b.r = r;
  std::vector<double> trial_nodes{0.0};
  trial_nodes.insert(trial_nodes.end(), gauss.points.begin(), gauss.points.end());
  b.trial = LagrangeBasis1D(std::move(trial_nodes));
  b.test = LagrangeBasis1D(gauss.points);
  b.gauss_weights = gauss.weights;

  b.alpha.resize(r, r + 1);
  b.beta.resize(r);
  for (int i = 1; i <= r; ++i) {
    const double w = gauss.weights[i - 1];
    for (int j = 0; j <= r; ++j) b.alpha(i - 1, j) = w * b.trial.derivative_at_node(j, i);
    b.beta(i - 1) = w;
  }
  return b;
}

Eigen::VectorXd reconstruct(std::span<const Eigen::VectorXd> coeffs, const TemporalBasis& basis,
                            const TimePartition& partition, int n, double t) {
  if (static_cast<int>(coeffs.size()) != basis.r + 1) {
    throw std::invalid_argument("reconstruct: expected r+1 coefficient vectors");
  }
  const double a = partition.start(n);
  const double b = partition.end(n);
  if (t < a || t > b) {
    throw std::invalid_argument("reconstruct: t outside interval " + std::to_string(n));
  }
  if (t == a) return coeffs[0];
  const double t_hat = (t - a) / (b - a);
  std::vector<double> phi(basis.r + 1);
  basis.trial.values(t_hat, phi);
  Eigen::VectorXd out = phi[0] * coeffs[0];
  for (int j = 1; j <= basis.r; ++j) out += phi[j] * coeffs[j];
  return out;
}

}  // namespace stmfem
