#include "harmonica/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace harmonica {

std::string Shape::str() const {
    std::ostringstream os;
    os << '(' << batch << ',' << channels << ',' << height << ',' << width << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, Scalar fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<Scalar> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel()) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_.str());
    }
}

Tensor Tensor::reshaped(Shape s) const {
    if (s.numel() != shape_.numel()) {
        throw DimensionError("cannot reshape " + shape_.str() + " to " + s.str());
    }
    return Tensor(s, data_);
}

void Tensor::fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
    if (other.shape_ != shape_) {
        throw DimensionError("tensor add: " + shape_.str() + " vs " + other.shape_.str());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(Scalar s) {
    for (auto& v : data_) v *= s;
    return *this;
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](Scalar v) { return std::isfinite(v); });
}

Tensor operator+(Tensor a, const Tensor& b) {
    a += b;
    return a;
}

Tensor operator*(Tensor a, Scalar s) {
    a *= s;
    return a;
}

Scalar max_relative_error(const Tensor& a, const Tensor& b, Scalar floor) {
    if (a.shape() != b.shape()) {
        throw DimensionError("compare: " + a.shape().str() + " vs " + b.shape().str());
    }
    Scalar worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Scalar denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

Scalar max_abs_difference(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("compare: " + a.shape().str() + " vs " + b.shape().str());
    }
    Scalar worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

namespace {
std::size_t out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad, const char* axis) {
    if (stride == 0) throw ConfigError(std::string("stride along ") + axis + " must be >= 1");
    if (kernel == 0) throw ConfigError(std::string("kernel along ") + axis + " must be >= 1");
    const std::size_t padded = in + 2 * pad;
    if (padded < kernel) {
        throw ConfigError(std::string("output ") + axis + " < 1: input " + std::to_string(in) + " + 2*pad " +
                          std::to_string(pad) + " is smaller than kernel " + std::to_string(kernel));
    }
    return (padded - kernel) / stride + 1;
}
}  // namespace

std::size_t ConvSpec::out_height(std::size_t h) const { return out_extent(h, kernel_h, stride_h, pad_h, "height"); }
std::size_t ConvSpec::out_width(std::size_t w) const { return out_extent(w, kernel_w, stride_w, pad_w, "width"); }

}  // namespace harmonica
