#pragma once

#include <functional>
#include <span>
#include <vector>

#include <cstdint>
#include <string>

#include "hiergen/graph.hpp"
#include "hiergen/model.hpp"

namespace hiergen {

// Builds a scalar from the bound inputs.
using ScalarFn = std::function<NodeId(Graph<double>&, std::span<const NodeId>)>;

// Compares reverse-mode gradients of `f` against fourth-order central
// differences for every element of every input. Returns the max over elements of
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// Throws NumericalError on non-finite values.
double grad_check(const ScalarFn& f, std::vector<Tensor<double>> inputs, double eps = 1e-3);

// Same comparison for every parameter of a model on one example's NLL.
double grad_check_model(const Seq2SeqModel<double>& model, const Example& example, double eps = 1e-3);

struct LayerCheck {
  std::string layer;
  std::size_t configurations = 0;
  double max_rel_error = 0.0;
};

// Checks glu, causal conv1d, flat/self/hierarchical attention (both
// normalizations) and a full model forward + NLL over `configurations`
// random small shapes each.
std::vector<LayerCheck> run_gradcheck_suite(std::size_t configurations, std::uint64_t seed);

}  // namespace hiergen
