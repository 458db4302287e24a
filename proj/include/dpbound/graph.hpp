#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dpbound/empirical.hpp"
#include "dpbound/rng.hpp"

namespace dpbound {

// One subsystem in the composite DAG. Components are indexed 1..C; index 0 is
// the global input pseudo-component and C+1 the scalar system-output (TPI)
// sink. The map receives the concatenation of all incoming route values,
// ordered by ascending source index then declared route order, plus a seeded
// random source (unused by deterministic components).
struct Component {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, Rng&)> map;
  int output_dim = 1;
  std::vector<SignalRoute> incoming;  // targets filled in by add_component
  bool stochastic = false;

  int input_dim() const;
};

// Per-sample signals collected while running the composite model: global
// inputs plus every component's assembled input and output tuples.
struct SignalTable {
  Eigen::MatrixXd inputs;                      // n x d global inputs
  std::vector<Eigen::MatrixXd> comp_inputs;    // [c-1]: n x input_dim(c)
  std::vector<Eigen::MatrixXd> comp_outputs;   // [c-1]: n x output_dim(c)

  int rows() const { return static_cast<int>(inputs.rows()); }
  // Output matrix of component c; c = 0 returns the global inputs.
  const Eigen::MatrixXd& outputs_of(int c) const;
  // Column slice carried by a route (source outputs restricted to columns).
  Eigen::MatrixXd route_values(const SignalRoute& route) const;
  // Scalar system output column (TPI).
  Eigen::VectorXd tpi() const;
};

class ComponentGraph {
 public:
  explicit ComponentGraph(int input_dim) : input_dim_(input_dim) {}

  // Appends the next component (index = current count + 1); incoming route
  // targets are set to that index. Returns the component index.
  int add_component(Component c);

  int num_components() const { return static_cast<int>(components_.size()); }
  int input_dim() const { return input_dim_; }
  const Component& component(int c) const { return components_.at(c - 1); }
  int output_dim_of(int c) const;  // c = 0 => global input dim

  // All routes in deterministic order: for each component (ascending), its
  // incoming routes sorted by ascending source then declared order; the TPI
  // route (C -> C+1, column 0) appended last. Kernel lists used throughout
  // the codebase are aligned with this ordering.
  std::vector<SignalRoute> all_routes() const;
  SignalRoute tpi_route() const;

  // Structural checks; returns human-readable problems (empty == ok).
  std::vector<std::string> validate() const;

  // Evaluates every component on each input row in topological order.
  // Deterministic given (inputs, seed); stochastic components consume factor
  // streams derived from (seed, component, row) so results do not depend on
  // evaluation order.
  SignalTable simulate(const Eigen::MatrixXd& inputs, std::uint64_t seed) const;

 private:
  int input_dim_ = 0;
  std::vector<Component> components_;
};

// Uniform-weight marginal of the signals carried by a route.
WeightedSamples collect_marginal(const SignalTable& table, const SignalRoute& route);

}  // namespace dpbound
