#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace wavreg {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor;

namespace detail {
struct Node;
struct TensorImpl {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::shared_ptr<Node> grad_fn;
};
}  // namespace detail

// Dense row-major float32 tensor with an optional gradient buffer.
//
// Tensor is a shared handle: copies alias the same storage, which is what the
// tape needs to route gradients back to the tensors that produced a value.
// Use clone() for an independent copy.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    bool defined() const noexcept { return impl_ != nullptr; }

    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
    std::size_t size() const { return impl_->data.size(); }

    std::span<float> data() { return impl_->data; }
    std::span<const float> data() const { return impl_->data; }
    float item() const;
    float operator[](std::size_t i) const { return impl_->data[i]; }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool on) { impl_->requires_grad = on; }

    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const float> grad() const { return impl_->grad; }
    // Allocates a zero buffer on first use.
    std::span<float> grad_buffer();
    void zero_grad();

    // Leaf copy of the values (no graph, no grad).
    Tensor detach() const;
    Tensor clone() const { return detach(); }

    bool is_leaf() const { return impl_->grad_fn == nullptr; }
    const detail::TensorImpl* id() const noexcept { return impl_.get(); }

private:
    friend struct detail::Node;
    friend class Tape;
    friend Tensor make_result(Shape shape, std::vector<float> values, std::vector<Tensor> inputs,
                              std::function<void(const Tensor& out)> backward_rule);
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;
};

namespace detail {
struct Node {
    std::vector<Tensor> inputs;
    std::function<void(const Tensor& out)> backward_rule;
};
}  // namespace detail

// Builds an op output. When gradient recording is on and any input requires a
// gradient, a node with `backward_rule` is attached. The rule reads out.grad()
// and accumulates into the inputs' grad_buffer().
Tensor make_result(Shape shape, std::vector<float> values, std::vector<Tensor> inputs,
                   std::function<void(const Tensor& out)> backward_rule);

// Ordered record of primitive applications reachable from a root, in
// topological order (inputs before outputs).
class Tape {
public:
    static Tape record(const Tensor& root);

    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }

    // Seeds d(root)/d(root) = 1 and replays the backward rules in reverse.
    void backward();

private:
    Tensor root_;
    std::vector<Tensor> nodes_;  // non-leaf tensors, topologically ordered
};

// Populates grads of every requires_grad tensor reachable from a scalar loss.
// Leaf gradients accumulate across calls; intermediate gradients are reset.
void backward(const Tensor& loss);

bool grad_enabled();

// Disables graph recording within its scope.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool all_finite(std::span<const float> values);

}  // namespace wavreg
