#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mtlb/errors.hpp"

namespace mtlb {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorNode;
}

/// Dense 64-bit float tensor that doubles as a node in a define-by-run
/// reverse-mode computation graph. Copies are shallow (shared node).
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool needs_grad = false);
    static Tensor full(Shape shape, double value, bool needs_grad = false);
    static Tensor scalar(double value, bool needs_grad = false);
    static Tensor from_values(Shape shape, std::vector<double> values, bool needs_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int64_t numel() const;
    bool is_scalar() const;
    double item() const;

    std::span<const double> values() const;
    std::span<double> mutable_values();

    /// Empty span until a backward pass has accumulated into this tensor.
    std::span<const double> grad() const;
    bool has_grad() const;
    /// Fills the grad buffer with zeros (allocating it if needed).
    void zero_grad();
    /// Drops the grad buffer entirely; has_grad() becomes false.
    void clear_grad();
    /// Grad buffer for direct writes, allocated and zeroed on first use.
    std::span<double> mutable_grad();

    bool needs_grad() const;
    void set_needs_grad(bool v);

    /// Stable node identity, usable as a map key across shallow copies.
    const void* id() const;

  private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::TensorNode> node_;

    friend struct detail::TensorNode;
    friend class GraphBuilder;
    friend void backward(const Tensor& root);
};

/// Scoped suppression of graph recording (validation / decoding passes).
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

bool grad_enabled();

/// Accumulates d(root)/d(x) into the grad buffer of every reachable tensor
/// that needs gradients. The root must be scalar.
void backward(const Tensor& root);

// Elementwise / structural ops. All compute in double; shape mismatches throw
// ShapeError naming the op and both shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int padding);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor clamp_min(const Tensor& a, double floor);
Tensor softmax(const Tensor& a);  // over the last dim; 1-D or 2-D input
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor squared_error(const Tensor& pred, const Tensor& target);  // sum of squares

/// Mean over rows of -log softmax(logits)[row, label]. Labels are class ids.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

/// [N,C,H,W] -> [N*H*W, C]: one row per spatial cell.
Tensor channels_to_rows(const Tensor& t);
/// Column slice [begin, end) of a 2-D tensor.
Tensor slice_cols(const Tensor& t, int64_t begin, int64_t end);
/// Row gather of a 2-D tensor; backward scatter-adds.
Tensor gather_rows(const Tensor& t, const std::vector<int64_t>& rows);

bool all_finite(std::span<const double> xs);
/// Throws NumericError naming `what` if any value is NaN/Inf.
void check_finite(const Tensor& t, const std::string& what);

}  // namespace mtlb
