#ifndef SACNET_AUTOGRAD_HPP
#define SACNET_AUTOGRAD_HPP

// Helpers for writing differentiable primitives outside tensor.cpp.

#include <initializer_list>
#include <vector>

#include "sacnet/tensor.hpp"

namespace sacnet::autograd {

using BackwardFn = std::function<void(const TapeNode&)>;

/// Wraps freshly computed values as an op result. Records `backward` on the
/// active tape when any input requires grad; otherwise the closure is dropped.
Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                   BackwardFn backward);

/// Gradient buffer of an input, zero-filled on first use.
std::vector<double>& grad_of(detail::TensorImpl& impl);

inline bool wants_grad(const detail::ImplPtr& impl) { return impl && impl->requires_grad; }

}  // namespace sacnet::autograd

#endif  // SACNET_AUTOGRAD_HPP
