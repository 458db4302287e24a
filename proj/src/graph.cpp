#include "dpbound/graph.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace dpbound {

namespace {

// Concatenation order of incoming routes: ascending source, then declared
// order (stable sort preserves declaration order among equal sources).
std::vector<SignalRoute> sorted_incoming(const Component& c) {
  std::vector<SignalRoute> routes = c.incoming;
  std::stable_sort(routes.begin(), routes.end(),
                   [](const SignalRoute& a, const SignalRoute& b) { return a.source < b.source; });
  return routes;
}

}  // namespace

int Component::input_dim() const {
  int d = 0;
  for (const auto& r : incoming) d += static_cast<int>(r.columns.size());
  return d;
}

const Eigen::MatrixXd& SignalTable::outputs_of(int c) const {
  if (c == 0) return inputs;
  return comp_outputs.at(static_cast<std::size_t>(c) - 1);
}

Eigen::MatrixXd SignalTable::route_values(const SignalRoute& route) const {
  const Eigen::MatrixXd& src = outputs_of(route.source);
  Eigen::MatrixXd out(src.rows(), static_cast<Eigen::Index>(route.columns.size()));
  for (std::size_t j = 0; j < route.columns.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = src.col(route.columns[j]);
  return out;
}

Eigen::VectorXd SignalTable::tpi() const {
  return comp_outputs.back().col(0);
}

int ComponentGraph::add_component(Component c) {
  const int index = num_components() + 1;
  for (auto& r : c.incoming) r.target = index;
  components_.push_back(std::move(c));
  return index;
}

int ComponentGraph::output_dim_of(int c) const {
  if (c == 0) return input_dim_;
  return component(c).output_dim;
}

SignalRoute ComponentGraph::tpi_route() const {
  const int C = num_components();
  return SignalRoute{C, C + 1, {0}};
}

std::vector<SignalRoute> ComponentGraph::all_routes() const {
  std::vector<SignalRoute> routes;
  for (int c = 1; c <= num_components(); ++c)
    for (const auto& r : sorted_incoming(component(c))) routes.push_back(r);
  routes.push_back(tpi_route());
  return routes;
}

std::vector<std::string> ComponentGraph::validate() const {
  std::vector<std::string> problems;
  auto complain = [&problems](const std::string& msg) { problems.push_back(msg); };

  if (input_dim_ <= 0) complain("global input dimension must be positive");
  if (components_.empty()) complain("graph has no components");

  for (int c = 1; c <= num_components(); ++c) {
    const Component& comp = component(c);
    std::ostringstream tag;
    tag << "component " << c << ": ";
    if (!comp.map) complain(tag.str() + "missing map");
    if (comp.output_dim <= 0) complain(tag.str() + "output_dim must be positive");
    if (comp.incoming.empty()) complain(tag.str() + "no incoming routes");
    for (const auto& r : comp.incoming) {
      if (r.target != c) complain(tag.str() + "route target mismatch");
      if (r.source >= c) complain(tag.str() + "non-causal route (source >= target)");
      if (r.source < 0) complain(tag.str() + "negative route source");
      if (r.columns.empty()) complain(tag.str() + "route with no columns");
      std::vector<int> cols = r.columns;
      std::sort(cols.begin(), cols.end());
      if (std::adjacent_find(cols.begin(), cols.end()) != cols.end())
        complain(tag.str() + "duplicate route column");
      if (r.source < c) {
        const int src_dim = (r.source >= 0 && r.source < c) ? output_dim_of(std::max(r.source, 0)) : -1;
        for (int col : r.columns)
          if (col < 0 || col >= src_dim) complain(tag.str() + "route column out of range");
      }
    }
  }
  if (!components_.empty() && components_.back().output_dim != 1)
    complain("TPI must be scalar: last component output_dim != 1");
  return problems;
}

SignalTable ComponentGraph::simulate(const Eigen::MatrixXd& inputs, std::uint64_t seed) const {
  {
    auto problems = validate();
    if (!problems.empty()) throw std::invalid_argument("simulate: invalid graph: " + problems.front());
  }
  if (inputs.cols() != input_dim_)
    throw std::invalid_argument("simulate: input dimension mismatch");

  const int n = static_cast<int>(inputs.rows());
  const int C = num_components();
  SignalTable table;
  table.inputs = inputs;
  table.comp_inputs.resize(C);
  table.comp_outputs.resize(C);

  Rng base(seed);
  Rng dummy(0);  // shared by deterministic components (never consumed)

  for (int c = 1; c <= C; ++c) {
    const Component& comp = component(c);
    const auto routes = sorted_incoming(comp);
    const int din = comp.input_dim();
    Eigen::MatrixXd in(n, din);
    int col = 0;
    for (const auto& r : routes) {
      const Eigen::MatrixXd& src = table.outputs_of(r.source);
      for (int rc : r.columns) in.col(col++) = src.col(rc);
    }
    Eigen::MatrixXd out(n, comp.output_dim);
    Rng comp_rng = base.derive("component", static_cast<std::uint64_t>(c));
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd y;
      if (comp.stochastic) {
        Rng row_rng = comp_rng.derive("row", static_cast<std::uint64_t>(i));
        y = comp.map(in.row(i).transpose(), row_rng);
      } else {
        y = comp.map(in.row(i).transpose(), dummy);
      }
      if (y.size() != comp.output_dim) {
        std::ostringstream msg;
        msg << "simulate: component " << c << " returned dimension " << y.size()
            << " != " << comp.output_dim << " at sample " << i;
        throw std::runtime_error(msg.str());
      }
      if (!y.allFinite()) {
        std::ostringstream msg;
        msg << "simulate: component " << c << " produced a non-finite value at sample " << i;
        throw std::runtime_error(msg.str());
      }
      out.row(i) = y.transpose();
    }
    table.comp_inputs[c - 1] = std::move(in);
    table.comp_outputs[c - 1] = std::move(out);
  }
  return table;
}

WeightedSamples collect_marginal(const SignalTable& table, const SignalRoute& route) {
  return WeightedSamples::uniform(table.route_values(route));
}

}  // namespace dpbound
