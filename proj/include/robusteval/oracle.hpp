#pragma once

#include <concepts>
#include <cstddef>
#include <vector>

#include "robusteval/records.hpp"
#include "robusteval/tensor.hpp"

namespace robusteval {

/// Minimal queryable classifier: class probabilities, cross-entropy loss and
/// its gradient with respect to the input.
template <class M>
concept ModelOracle = requires(const M& m, const TensorBlock& x, std::size_t y) {
  { m.predict(x) } -> std::convertible_to<std::vector<double>>;
  { m.loss(x, y) } -> std::convertible_to<double>;
  { m.input_grad(x, y) } -> std::convertible_to<TensorBlock>;
};

/// Oracles may opt in to concurrent queries with `static constexpr bool reentrant = true`.
template <class M>
constexpr bool is_reentrant() {
  if constexpr (requires { M::reentrant; }) {
    return M::reentrant;
  } else {
    return false;
  }
}

template <ModelOracle M>
std::size_t predicted_class(const M& model, const TensorBlock& x) {
  const std::vector<double> p = model.predict(x);
  return argmax(p);
}

}  // namespace robusteval
