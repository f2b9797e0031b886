#include "mtlb/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace mtlb {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until first accumulation
    bool needs_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;
    const char* op = "leaf";

    int64_t numel() const { return static_cast<int64_t>(values.size()); }

    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(values.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

using detail::TensorNode;

namespace {

thread_local bool g_grad_enabled = true;

std::shared_ptr<TensorNode> new_node(Shape shape, std::vector<double> values) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    return n;
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

void require(bool cond, const char* op, const std::string& msg) {
    if (!cond) throw ShapeError(std::string(op) + ": " + msg);
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

// Access to Tensor internals for op construction.
class GraphBuilder {
  public:
    static Tensor wrap(std::shared_ptr<TensorNode> n) { return Tensor(std::move(n)); }
    static const std::shared_ptr<TensorNode>& node(const Tensor& t) { return t.node_; }

    // Creates the result node of an op. Parents and the backward function are
    // recorded only when grad mode is on and some input needs gradients.
    static Tensor op_result(const char* op, Shape shape, std::vector<double> values,
                            std::vector<std::shared_ptr<TensorNode>> parents,
                            std::function<void(TensorNode&)> backward_fn) {
        auto n = new_node(std::move(shape), std::move(values));
        n->op = op;
        bool track = g_grad_enabled;
        if (track) {
            bool any = false;
            for (const auto& p : parents) any = any || p->needs_grad;
            track = any;
        }
        if (track) {
            n->needs_grad = true;
            n->parents = std::move(parents);
            n->backward_fn = std::move(backward_fn);
        }
        return wrap(std::move(n));
    }
};

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool needs_grad) {
    return full(std::move(shape), 0.0, needs_grad);
}

Tensor Tensor::full(Shape shape, double value, bool needs_grad) {
    const int64_t n = shape_numel(shape);
    require(n >= 0 && std::all_of(shape.begin(), shape.end(), [](int64_t d) { return d > 0; }),
            "tensor", "extents must be positive, got " + shape_str(shape));
    auto node = new_node(std::move(shape), std::vector<double>(static_cast<size_t>(n), value));
    node->needs_grad = needs_grad;
    return GraphBuilder::wrap(std::move(node));
}

Tensor Tensor::scalar(double value, bool needs_grad) {
    return from_values({1}, {value}, needs_grad);
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool needs_grad) {
    const int64_t n = shape_numel(shape);
    require(n == static_cast<int64_t>(values.size()), "tensor",
            "value count " + std::to_string(values.size()) + " does not match shape " + shape_str(shape));
    require(std::all_of(shape.begin(), shape.end(), [](int64_t d) { return d > 0; }), "tensor",
            "extents must be positive, got " + shape_str(shape));
    auto node = new_node(std::move(shape), std::move(values));
    node->needs_grad = needs_grad;
    return GraphBuilder::wrap(std::move(node));
}

const Shape& Tensor::shape() const { return node_->shape; }
int64_t Tensor::numel() const { return node_->numel(); }
bool Tensor::is_scalar() const { return node_->numel() == 1; }

double Tensor::item() const {
    require(is_scalar(), "item", "tensor is not scalar, shape " + shape_str(node_->shape));
    return node_->values[0];
}

std::span<const double> Tensor::values() const { return node_->values; }
std::span<double> Tensor::mutable_values() { return node_->values; }

std::span<const double> Tensor::grad() const { return node_->grad; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }

void Tensor::zero_grad() {
    node_->grad_buffer();
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::clear_grad() { node_->grad.clear(); }

std::span<double> Tensor::mutable_grad() { return node_->grad_buffer(); }

bool Tensor::needs_grad() const { return node_->needs_grad; }
void Tensor::set_needs_grad(bool v) { node_->needs_grad = v; }

const void* Tensor::id() const { return node_.get(); }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

void backward(const Tensor& root) {
    if (!root.defined()) throw Error("backward: undefined tensor");
    if (!root.is_scalar())
        throw ShapeError("backward: root must be scalar, shape " + shape_str(root.shape()));

    TensorNode* root_node = GraphBuilder::node(root).get();

    // Post-order DFS; reverse order is a valid topological order for the pull
    // of adjoints from the root toward the leaves.
    std::vector<TensorNode*> order;
    std::unordered_set<const TensorNode*> visited;
    struct Frame {
        TensorNode* node;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root_node, 0});
    visited.insert(root_node);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            TensorNode* p = f.node->parents[f.next_parent++].get();
            if (p->needs_grad && visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }
    // Interior adjoints start fresh on every invocation; only leaves (the
    // trainable parameters) accumulate across backward calls.
    for (TensorNode* n : order)
        if (!n->parents.empty()) std::fill(n->grad_buffer().begin(), n->grad_buffer().end(), 0.0);
    root_node->grad_buffer()[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

namespace {

using NodePtr = std::shared_ptr<TensorNode>;

const NodePtr& nd(const Tensor& t) { return GraphBuilder::node(t); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_fail("add", a.shape(), b.shape());
    std::vector<double> out(a.values().begin(), a.values().end());
    for (size_t i = 0; i < out.size(); ++i) out[i] += b.values()[i];
    return GraphBuilder::op_result("add", a.shape(), std::move(out), {nd(a), nd(b)},
                                   [](TensorNode& self) {
                                       for (int k = 0; k < 2; ++k) {
                                           TensorNode& p = *self.parents[k];
                                           if (!p.needs_grad) continue;
                                           auto& g = p.grad_buffer();
                                           for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                       }
                                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_fail("sub", a.shape(), b.shape());
    std::vector<double> out(a.values().begin(), a.values().end());
    for (size_t i = 0; i < out.size(); ++i) out[i] -= b.values()[i];
    return GraphBuilder::op_result("sub", a.shape(), std::move(out), {nd(a), nd(b)},
                                   [](TensorNode& self) {
                                       if (self.parents[0]->needs_grad) {
                                           auto& g = self.parents[0]->grad_buffer();
                                           for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                       }
                                       if (self.parents[1]->needs_grad) {
                                           auto& g = self.parents[1]->grad_buffer();
                                           for (size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
                                       }
                                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
    std::vector<double> out(a.values().begin(), a.values().end());
    for (size_t i = 0; i < out.size(); ++i) out[i] *= b.values()[i];
    return GraphBuilder::op_result("mul", a.shape(), std::move(out), {nd(a), nd(b)},
                                   [](TensorNode& self) {
                                       TensorNode& pa = *self.parents[0];
                                       TensorNode& pb = *self.parents[1];
                                       if (pa.needs_grad) {
                                           auto& g = pa.grad_buffer();
                                           for (size_t i = 0; i < g.size(); ++i)
                                               g[i] += self.grad[i] * pb.values[i];
                                       }
                                       if (pb.needs_grad) {
                                           auto& g = pb.grad_buffer();
                                           for (size_t i = 0; i < g.size(); ++i)
                                               g[i] += self.grad[i] * pa.values[i];
                                       }
                                   });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.values().begin(), a.values().end());
    for (double& v : out) v *= c;
    return GraphBuilder::op_result("scale", a.shape(), std::move(out), {nd(a)},
                                   [c](TensorNode& self) {
                                       auto& g = self.parents[0]->grad_buffer();
                                       for (size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad[i];
                                   });
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.values().begin(), a.values().end());
    for (double& v : out) v += c;
    return GraphBuilder::op_result("add_scalar", a.shape(), std::move(out), {nd(a)},
                                   [](TensorNode& self) {
                                       auto& g = self.parents[0]->grad_buffer();
                                       for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                   });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.shape().size() == 2 && b.shape().size() == 2, "matmul",
            "expects 2-D operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    if (a.shape()[1] != b.shape()[0]) shape_fail("matmul", a.shape(), b.shape());
    const int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> out(static_cast<size_t>(m * n), 0.0);
    const auto av = a.values();
    const auto bv = b.values();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t l = 0; l < k; ++l) {
            const double ail = av[i * k + l];
            for (int64_t j = 0; j < n; ++j) out[i * n + j] += ail * bv[l * n + j];
        }
    return GraphBuilder::op_result(
        "matmul", {m, n}, std::move(out), {nd(a), nd(b)}, [m, k, n](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            TensorNode& pb = *self.parents[1];
            if (pa.needs_grad) {
                auto& ga = pa.grad_buffer();
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) {
                        const double g = self.grad[i * n + j];
                        for (int64_t l = 0; l < k; ++l) ga[i * k + l] += g * pb.values[l * n + j];
                    }
            }
            if (pb.needs_grad) {
                auto& gb = pb.grad_buffer();
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t l = 0; l < k; ++l) {
                        const double av_il = pa.values[i * k + l];
                        for (int64_t j = 0; j < n; ++j) gb[l * n + j] += av_il * self.grad[i * n + j];
                    }
            }
        });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int padding) {
    require(input.shape().size() == 4, "conv2d", "input must be [N,C,H,W], got " + shape_str(input.shape()));
    require(weight.shape().size() == 4, "conv2d",
            "weight must be [Co,Ci,K,K], got " + shape_str(weight.shape()));
    const int64_t n = input.shape()[0], ci = input.shape()[1], h = input.shape()[2], w = input.shape()[3];
    const int64_t co = weight.shape()[0], kh = weight.shape()[2], kw = weight.shape()[3];
    if (weight.shape()[1] != ci) shape_fail("conv2d", input.shape(), weight.shape());
    require(bias.shape().size() == 1 && bias.shape()[0] == co, "conv2d",
            "bias must be [Co]=" + std::to_string(co) + ", got " + shape_str(bias.shape()));
    const int64_t ho = h + 2 * padding - kh + 1;
    const int64_t wo = w + 2 * padding - kw + 1;
    require(ho > 0 && wo > 0, "conv2d", "kernel larger than padded input");

    std::vector<double> out(static_cast<size_t>(n * co * ho * wo), 0.0);
    const auto in = input.values();
    const auto wv = weight.values();
    const auto bv = bias.values();
    for (int64_t b = 0; b < n; ++b)
        for (int64_t oc = 0; oc < co; ++oc) {
            for (int64_t oy = 0; oy < ho; ++oy)
                for (int64_t ox = 0; ox < wo; ++ox) {
                    double acc = bv[oc];
                    for (int64_t ic = 0; ic < ci; ++ic)
                        for (int64_t ky = 0; ky < kh; ++ky) {
                            const int64_t iy = oy + ky - padding;
                            if (iy < 0 || iy >= h) continue;
                            const double* in_row = &in[((b * ci + ic) * h + iy) * w];
                            const double* w_row = &wv[((oc * ci + ic) * kh + ky) * kw];
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                const int64_t ix = ox + kx - padding;
                                if (ix < 0 || ix >= w) continue;
                                acc += in_row[ix] * w_row[kx];
                            }
                        }
                    out[((b * co + oc) * ho + oy) * wo + ox] = acc;
                }
        }
    return GraphBuilder::op_result(
        "conv2d", {n, co, ho, wo}, std::move(out), {nd(input), nd(weight), nd(bias)},
        [n, ci, h, w, co, kh, kw, ho, wo, padding](TensorNode& self) {
            TensorNode& pin = *self.parents[0];
            TensorNode& pw = *self.parents[1];
            TensorNode& pb = *self.parents[2];
            const auto& g = self.grad;
            if (pb.needs_grad) {
                auto& gb = pb.grad_buffer();
                for (int64_t b = 0; b < n; ++b)
                    for (int64_t oc = 0; oc < co; ++oc) {
                        double acc = 0.0;
                        const double* gp = &g[(b * co + oc) * ho * wo];
                        for (int64_t i = 0; i < ho * wo; ++i) acc += gp[i];
                        gb[oc] += acc;
                    }
            }
            const bool want_in = pin.needs_grad;
            const bool want_w = pw.needs_grad;
            if (!want_in && !want_w) return;
            auto* gin = want_in ? &pin.grad_buffer() : nullptr;
            auto* gw = want_w ? &pw.grad_buffer() : nullptr;
            for (int64_t b = 0; b < n; ++b)
                for (int64_t oc = 0; oc < co; ++oc)
                    for (int64_t oy = 0; oy < ho; ++oy)
                        for (int64_t ox = 0; ox < wo; ++ox) {
                            const double go = g[((b * co + oc) * ho + oy) * wo + ox];
                            if (go == 0.0) continue;
                            for (int64_t ic = 0; ic < ci; ++ic)
                                for (int64_t ky = 0; ky < kh; ++ky) {
                                    const int64_t iy = oy + ky - padding;
                                    if (iy < 0 || iy >= h) continue;
                                    for (int64_t kx = 0; kx < kw; ++kx) {
                                        const int64_t ix = ox + kx - padding;
                                        if (ix < 0 || ix >= w) continue;
                                        const size_t in_i = ((b * ci + ic) * h + iy) * w + ix;
                                        const size_t w_i = ((oc * ci + ic) * kh + ky) * kw + kx;
                                        if (gw) (*gw)[w_i] += go * pin.values[in_i];
                                        if (gin) (*gin)[in_i] += go * pw.values[w_i];
                                    }
                                }
                        }
        });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.values().begin(), a.values().end());
    for (double& v : out) v = std::max(0.0, v);
    return GraphBuilder::op_result("relu", a.shape(), std::move(out), {nd(a)},
                                   [](TensorNode& self) {
                                       TensorNode& p = *self.parents[0];
                                       auto& g = p.grad_buffer();
                                       for (size_t i = 0; i < g.size(); ++i)
                                           if (p.values[i] > 0.0) g[i] += self.grad[i];
                                   });
}

Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.values().begin(), a.values().end());
    for (double& v : out) v = stable_sigmoid(v);
    return GraphBuilder::op_result("sigmoid", a.shape(), std::move(out), {nd(a)},
                                   [](TensorNode& self) {
                                       auto& g = self.parents[0]->grad_buffer();
                                       for (size_t i = 0; i < g.size(); ++i) {
                                           const double s = self.values[i];
                                           g[i] += self.grad[i] * s * (1.0 - s);
                                       }
                                   });
}

Tensor exp(const Tensor& a) {
    std::vector<double> out(a.values().begin(), a.values().end());
    for (double& v : out) v = std::exp(v);
    return GraphBuilder::op_result("exp", a.shape(), std::move(out), {nd(a)},
                                   [](TensorNode& self) {
                                       auto& g = self.parents[0]->grad_buffer();
                                       for (size_t i = 0; i < g.size(); ++i)
                                           g[i] += self.grad[i] * self.values[i];
                                   });
}

Tensor log(const Tensor& a) {
    std::vector<double> out(a.values().begin(), a.values().end());
    for (double& v : out) v = std::log(v);
    return GraphBuilder::op_result("log", a.shape(), std::move(out), {nd(a)},
                                   [](TensorNode& self) {
                                       TensorNode& p = *self.parents[0];
                                       auto& g = p.grad_buffer();
                                       for (size_t i = 0; i < g.size(); ++i)
                                           g[i] += self.grad[i] / p.values[i];
                                   });
}

Tensor clamp_min(const Tensor& a, double floor) {
    std::vector<double> out(a.values().begin(), a.values().end());
    for (double& v : out) v = std::max(v, floor);
    return GraphBuilder::op_result("clamp_min", a.shape(), std::move(out), {nd(a)},
                                   [floor](TensorNode& self) {
                                       TensorNode& p = *self.parents[0];
                                       auto& g = p.grad_buffer();
                                       for (size_t i = 0; i < g.size(); ++i)
                                           if (p.values[i] >= floor) g[i] += self.grad[i];
                                   });
}

namespace {

std::pair<int64_t, int64_t> rows_cols(const Tensor& t, const char* op) {
    const auto& s = t.shape();
    if (s.size() == 1) return {1, s[0]};
    require(s.size() == 2, op, "expects 1-D or 2-D input, got " + shape_str(s));
    return {s[0], s[1]};
}

}  // namespace

Tensor softmax(const Tensor& a) {
    auto [rows, cols] = rows_cols(a, "softmax");
    std::vector<double> out(a.values().begin(), a.values().end());
    for (int64_t r = 0; r < rows; ++r) {
        double* row = &out[r * cols];
        const double mx = *std::max_element(row, row + cols);
        double denom = 0.0;
        for (int64_t c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            denom += row[c];
        }
        for (int64_t c = 0; c < cols; ++c) row[c] /= denom;
    }
    return GraphBuilder::op_result("softmax", a.shape(), std::move(out), {nd(a)},
                                   [rows = rows, cols = cols](TensorNode& self) {
                                       auto& g = self.parents[0]->grad_buffer();
                                       for (int64_t r = 0; r < rows; ++r) {
                                           const double* s = &self.values[r * cols];
                                           const double* go = &self.grad[r * cols];
                                           double dot = 0.0;
                                           for (int64_t c = 0; c < cols; ++c) dot += go[c] * s[c];
                                           for (int64_t c = 0; c < cols; ++c)
                                               g[r * cols + c] += s[c] * (go[c] - dot);
                                       }
                                   });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    return GraphBuilder::op_result("sum", {1}, {acc}, {nd(a)}, [](TensorNode& self) {
        auto& g = self.parents[0]->grad_buffer();
        const double go = self.grad[0];
        for (double& v : g) v += go;
    });
}

Tensor mean(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    const double inv = 1.0 / static_cast<double>(a.numel());
    return GraphBuilder::op_result("mean", {1}, {acc * inv}, {nd(a)}, [inv](TensorNode& self) {
        auto& g = self.parents[0]->grad_buffer();
        const double go = self.grad[0] * inv;
        for (double& v : g) v += go;
    });
}

Tensor squared_error(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) shape_fail("squared_error", pred.shape(), target.shape());
    double acc = 0.0;
    const auto pv = pred.values();
    const auto tv = target.values();
    for (size_t i = 0; i < pv.size(); ++i) {
        const double d = pv[i] - tv[i];
        acc += d * d;
    }
    return GraphBuilder::op_result("squared_error", {1}, {acc}, {nd(pred), nd(target)},
                                   [](TensorNode& self) {
                                       TensorNode& pp = *self.parents[0];
                                       TensorNode& pt = *self.parents[1];
                                       const double go = self.grad[0];
                                       if (pp.needs_grad) {
                                           auto& g = pp.grad_buffer();
                                           for (size_t i = 0; i < g.size(); ++i)
                                               g[i] += 2.0 * go * (pp.values[i] - pt.values[i]);
                                       }
                                       if (pt.needs_grad) {
                                           auto& g = pt.grad_buffer();
                                           for (size_t i = 0; i < g.size(); ++i)
                                               g[i] -= 2.0 * go * (pp.values[i] - pt.values[i]);
                                       }
                                   });
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    auto [rows, cols] = rows_cols(logits, "softmax_cross_entropy");
    require(static_cast<int64_t>(labels.size()) == rows, "softmax_cross_entropy",
            "label count " + std::to_string(labels.size()) + " does not match rows " +
                std::to_string(rows));
    for (int y : labels)
        require(y >= 0 && y < cols, "softmax_cross_entropy",
                "label " + std::to_string(y) + " out of range [0," + std::to_string(cols) + ")");
    const auto lv = logits.values();
    double total = 0.0;
    for (int64_t r = 0; r < rows; ++r) {
        const double* row = &lv[r * cols];
        const double mx = *std::max_element(row, row + cols);
        double denom = 0.0;
        for (int64_t c = 0; c < cols; ++c) denom += std::exp(row[c] - mx);
        total += mx + std::log(denom) - row[labels[r]];
    }
    const double inv = 1.0 / static_cast<double>(rows);
    return GraphBuilder::op_result(
        "softmax_cross_entropy", {1}, {total * inv}, {nd(logits)},
        [labels, rows = rows, cols = cols, inv](TensorNode& self) {
            TensorNode& p = *self.parents[0];
            auto& g = p.grad_buffer();
            const double go = self.grad[0] * inv;
            for (int64_t r = 0; r < rows; ++r) {
                const double* row = &p.values[r * cols];
                const double mx = *std::max_element(row, row + cols);
                double denom = 0.0;
                for (int64_t c = 0; c < cols; ++c) denom += std::exp(row[c] - mx);
                for (int64_t c = 0; c < cols; ++c) {
                    const double soft = std::exp(row[c] - mx) / denom;
                    g[r * cols + c] += go * (soft - (c == labels[r] ? 1.0 : 0.0));
                }
            }
        });
}

Tensor channels_to_rows(const Tensor& t) {
    require(t.shape().size() == 4, "channels_to_rows",
            "expects [N,C,H,W], got " + shape_str(t.shape()));
    const int64_t n = t.shape()[0], c = t.shape()[1], h = t.shape()[2], w = t.shape()[3];
    const int64_t cells = n * h * w;
    std::vector<double> out(static_cast<size_t>(cells * c));
    const auto v = t.values();
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t y = 0; y < h; ++y)
                for (int64_t x = 0; x < w; ++x)
                    out[(((b * h + y) * w + x)) * c + ch] = v[((b * c + ch) * h + y) * w + x];
    return GraphBuilder::op_result("channels_to_rows", {cells, c}, std::move(out), {nd(t)},
                                   [n, c, h, w](TensorNode& self) {
                                       auto& g = self.parents[0]->grad_buffer();
                                       for (int64_t b = 0; b < n; ++b)
                                           for (int64_t ch = 0; ch < c; ++ch)
                                               for (int64_t y = 0; y < h; ++y)
                                                   for (int64_t x = 0; x < w; ++x)
                                                       g[((b * c + ch) * h + y) * w + x] +=
                                                           self.grad[((b * h + y) * w + x) * c + ch];
                                   });
}

Tensor slice_cols(const Tensor& t, int64_t begin, int64_t end) {
    require(t.shape().size() == 2, "slice_cols", "expects 2-D input, got " + shape_str(t.shape()));
    const int64_t rows = t.shape()[0], cols = t.shape()[1];
    require(begin >= 0 && begin < end && end <= cols, "slice_cols",
            "invalid column range [" + std::to_string(begin) + "," + std::to_string(end) +
                ") for width " + std::to_string(cols));
    const int64_t width = end - begin;
    std::vector<double> out(static_cast<size_t>(rows * width));
    const auto v = t.values();
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < width; ++j) out[r * width + j] = v[r * cols + begin + j];
    return GraphBuilder::op_result("slice_cols", {rows, width}, std::move(out), {nd(t)},
                                   [rows, cols, begin, width](TensorNode& self) {
                                       auto& g = self.parents[0]->grad_buffer();
                                       for (int64_t r = 0; r < rows; ++r)
                                           for (int64_t j = 0; j < width; ++j)
                                               g[r * cols + begin + j] += self.grad[r * width + j];
                                   });
}

Tensor gather_rows(const Tensor& t, const std::vector<int64_t>& rows) {
    require(t.shape().size() == 2, "gather_rows", "expects 2-D input, got " + shape_str(t.shape()));
    const int64_t src_rows = t.shape()[0], cols = t.shape()[1];
    require(!rows.empty(), "gather_rows", "empty row selection");
    for (int64_t r : rows)
        require(r >= 0 && r < src_rows, "gather_rows",
                "row " + std::to_string(r) + " out of range [0," + std::to_string(src_rows) + ")");
    std::vector<double> out(rows.size() * static_cast<size_t>(cols));
    const auto v = t.values();
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy_n(&v[rows[i] * cols], cols, &out[i * cols]);
    return GraphBuilder::op_result(
        "gather_rows", {static_cast<int64_t>(rows.size()), cols}, std::move(out), {nd(t)},
        [rows, cols](TensorNode& self) {
            auto& g = self.parents[0]->grad_buffer();
            for (size_t i = 0; i < rows.size(); ++i)
                for (int64_t c = 0; c < cols; ++c) g[rows[i] * cols + c] += self.grad[i * cols + c];
        });
}

bool all_finite(std::span<const double> xs) {
    for (double x : xs)
        if (!std::isfinite(x)) return false;
    return true;
}

void check_finite(const Tensor& t, const std::string& what) {
    if (!all_finite(t.values()))
        throw NumericError("non-finite value in " + what + " (shape " + shape_str(t.shape()) + ")");
}

}  // namespace mtlb
