#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "harmonica/tensor.hpp"

namespace harmonica::nn {

/// A learned tensor with its gradient and SGD momentum buffer. grad and
/// momentum always have the shape of value.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor momentum;

    Parameter(std::string name_, Tensor value_)
        : name(std::move(name_)), value(std::move(value_)), grad(value.shape()), momentum(value.shape()) {}

    void zero_grad() { grad.fill(0.0); }
};

/// Non-learned persistent state (BN running statistics).
struct Buffer {
    std::string name;
    Tensor* tensor;
};

/// Base of every trainable layer. backward() must follow a forward() on the
/// same layer and consumes its cached state; calling it otherwise throws
/// StateError. Parameter gradients accumulate until zero_grad().
class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor forward(const Tensor& input, bool training) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;

    virtual std::vector<Parameter*> parameters() { return {}; }
    virtual std::vector<Buffer> buffers() { return {}; }
    [[nodiscard]] virtual std::string kind() const = 0;

    /// Visits direct sub-layers (containers only).
    virtual void for_each_child(const std::function<void(Layer&)>& fn) { (void)fn; }
    /// When frozen, stochastic layers reuse the noise drawn by their last
    /// training forward pass. Used by gradient checking.
    virtual void freeze_noise(bool frozen) { (void)frozen; }

    void zero_grad();
    [[nodiscard]] std::size_t parameter_count();
};

using LayerPtr = std::unique_ptr<Layer>;

/// Depth-first visit of a layer and all of its descendants.
void walk(Layer& root, const std::function<void(Layer&)>& fn);

}  // namespace harmonica::nn
