#include "wavreg/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "wavreg/errors.hpp"

namespace wavreg {

namespace {
thread_local bool g_grad_enabled = true;
}

const char* category_name(ErrorCategory category) {
    switch (category) {
        case ErrorCategory::dimension: return "dimension";
        case ErrorCategory::input: return "input";
        case ErrorCategory::usage: return "usage";
        case ErrorCategory::numeric: return "numeric";
        case ErrorCategory::config: return "config";
        case ErrorCategory::format: return "format";
        case ErrorCategory::unsupported_base: return "unsupported-base";
        case ErrorCategory::resolution: return "resolution";
    }
    return "unknown";
}

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    const auto n = shape_size(shape);
    return from(std::move(shape), std::vector<float>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
    for (auto d : shape)
        if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
    if (shape_size(shape) != values.size())
        throw DimensionError("shape " + shape_string(shape) + " does not match " + std::to_string(values.size()) +
                             " values");
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) { return from({1}, {value}, requires_grad); }

float Tensor::item() const {
    if (size() != 1) throw UsageError("item() on tensor of shape " + shape_string(shape()));
    return impl_->data[0];
}

std::span<float> Tensor::grad_buffer() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0f);
    return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.clear(); }

Tensor Tensor::detach() const { return from(impl_->shape, impl_->data, false); }

Tensor make_result(Shape shape, std::vector<float> values, std::vector<Tensor> inputs,
                   std::function<void(const Tensor& out)> backward_rule) {
    Tensor out = Tensor::from(std::move(shape), std::move(values));
    if (!g_grad_enabled) return out;
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in.requires_grad();
    if (!needs) return out;
    out.impl_->requires_grad = true;
    out.impl_->grad_fn = std::make_shared<detail::Node>(detail::Node{std::move(inputs), std::move(backward_rule)});
    return out;
}

Tape Tape::record(const Tensor& root) {
    Tape tape;
    tape.root_ = root;
    if (!root.defined() || root.is_leaf()) return tape;

    // Iterative post-order DFS; each non-leaf is emitted once, after its inputs.
    std::unordered_set<const detail::TensorImpl*> visited;
    std::vector<std::pair<Tensor, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root.id());
    while (!stack.empty()) {
        auto& [t, next] = stack.back();
        const auto& inputs = t.impl_->grad_fn->inputs;
        if (next < inputs.size()) {
            const Tensor child = inputs[next++];
            if (!child.is_leaf() && visited.insert(child.id()).second) stack.emplace_back(child, 0);
            continue;
        }
        tape.nodes_.push_back(t);
        stack.pop_back();
    }
    return tape;
}

void Tape::backward() {
    if (nodes_.empty()) {
        // A bare leaf: d(root)/d(root) = 1.
        if (root_.defined() && root_.requires_grad())
            for (auto& g : root_.grad_buffer()) g += 1.0f;
        return;
    }
    for (auto& t : nodes_) t.zero_grad();
    for (auto& g : root_.grad_buffer()) g = 1.0f;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        const Tensor& t = *it;
        if (!t.has_grad()) continue;  // not on a path from the root
        t.impl_->grad_fn->backward_rule(t);
    }
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw UsageError("backward() needs a scalar loss, got " +
                         (loss.defined() ? shape_string(loss.shape()) : std::string("undefined tensor")));
    if (!std::isfinite(loss.item())) throw NumericError("backward() on non-finite loss");
    Tape::record(loss).backward();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool all_finite(std::span<const float> values) {
    for (float v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace wavreg
