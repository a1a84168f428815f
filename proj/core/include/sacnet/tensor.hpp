#ifndef SACNET_TENSOR_HPP
#define SACNET_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sacnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient reaches this tensor
  bool requires_grad = false;
};
using ImplPtr = std::shared_ptr<TensorImpl>;
}  // namespace detail

/// Dense row-major float64 array with an optional gradient buffer.
///
/// Copies share storage (handle semantics, like a framework tensor). Values
/// are fixed after construction except through `mutable_data()`, which is
/// reserved for leaf initialization and optimizer updates.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on = true);
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Value copy with no gradient history.
  Tensor detach() const;

  const detail::ImplPtr& impl() const noexcept { return impl_; }
  explicit Tensor(detail::ImplPtr impl) : impl_(std::move(impl)) {}

 private:
  detail::ImplPtr impl_;
};

/// One recorded primitive: inputs, output, and the rule that pushes the
/// output gradient back onto the inputs.
struct TapeNode {
  std::vector<detail::ImplPtr> inputs;
  detail::ImplPtr output;
  std::function<void(const TapeNode&)> backward;
};

/// Reverse-mode recorder. Constructing a Tape makes it the active tape for the
/// current thread (the previous one is restored on destruction). Operations
/// record only while a tape is active and at least one input requires grad.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in exact reverse order.
  /// Clears the recorded nodes afterwards. Gradients accumulate into leaves.
  void backward(const Tensor& loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  void record(TapeNode node);

  static Tape* active() noexcept;

 private:
  std::vector<TapeNode> nodes_;
  Tape* previous_ = nullptr;
};

// ---- construction helpers -------------------------------------------------

Tensor zeros(Shape shape);
Tensor ones(Shape shape);
Tensor eye(std::size_t n);

// ---- elementwise ----------------------------------------------------------
// Operands must have equal shapes; a single-element tensor broadcasts.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor silu(const Tensor& x);
/// Gradient is zero where the input was clamped.
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// ---- shape ----------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
Tensor flatten(const Tensor& x);
/// 2-D transpose.
Tensor transpose(const Tensor& x);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// x[n×d] · w[d×e] + b[e] (bias added to every row; `b` may be undefined).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
/// Max-subtracted softmax along `axis`. NaN inputs propagate to the output.
Tensor softmax(const Tensor& x, std::size_t axis);

// ---- image ops (C×H×W) ----------------------------------------------------

/// Zero-padded cross-correlation; `b` may be undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
              std::size_t padding);
/// Bilinear upsampling with half-pixel centres (align_corners = false).
Tensor upsample_bilinear(const Tensor& x, std::size_t factor);

/// Scalar bilinear read used by sampling kernels. Each of the four corners
/// outside the image contributes zero.
double bilinear_value(std::span<const double> plane, std::size_t height, std::size_t width,
                      double px, double py);

/// Samples every channel at column `px`, row `py`. Differentiable wrt the map
/// and wrt both (single-element) coordinate tensors.
Tensor bilinear_sample(const Tensor& x, const Tensor& px, const Tensor& py);
Tensor bilinear_sample(const Tensor& x, double px, double py);

/// Reads C-vectors at flat spatial positions of a C×H×W map into rows of an
/// n×C matrix. Position -1 yields a zero row.
Tensor gather_tokens(const Tensor& x, std::span<const long> positions);
/// Inverse of gather: writes row r of `tokens` to flat position positions[r]
/// of a C×H×W map. Positions must be distinct and in range; uncovered
/// positions are zero.
Tensor scatter_tokens(const Tensor& tokens, std::span<const long> positions, std::size_t height,
                      std::size_t width);

/// C×H×W → (H·W)×C.
Tensor map_to_tokens(const Tensor& x);
/// (H·W)×C → C×H×W.
Tensor tokens_to_map(const Tensor& tokens, std::size_t height, std::size_t width);

}  // namespace sacnet

#endif  // SACNET_TENSOR_HPP
