#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace harmonica {

using Scalar = double;

// Error hierarchy. The CLI maps ConfigError/InputError/FormatError/DimensionError
// to exit code 2 and NumericError to exit code 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct InputError : Error {
    using Error::Error;
};
struct FormatError : Error {
    using Error::Error;
};
struct StateError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

/// NCHW extents. All tensors in the library are rank 4; vectors and
/// matrices use trailing singleton axes.
struct Shape {
    std::size_t batch = 0;
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    [[nodiscard]] std::size_t numel() const { return batch * channels * height * width; }
    [[nodiscard]] std::size_t plane() const { return height * width; }
    [[nodiscard]] std::size_t sample() const { return channels * height * width; }
    [[nodiscard]] std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, Scalar fill = 0.0);
    Tensor(Shape shape, std::vector<Scalar> data);
    Tensor(std::size_t b, std::size_t c, std::size_t h, std::size_t w, Scalar fill = 0.0)
        : Tensor(Shape{b, c, h, w}, fill) {}

    [[nodiscard]] const Shape& shape() const { return shape_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] bool empty() const { return data_.empty(); }

    [[nodiscard]] std::span<Scalar> data() { return data_; }
    [[nodiscard]] std::span<const Scalar> data() const { return data_; }
    [[nodiscard]] std::vector<Scalar>& vec() { return data_; }
    [[nodiscard]] const std::vector<Scalar>& vec() const { return data_; }

    Scalar& operator[](std::size_t i) { return data_[i]; }
    Scalar operator[](std::size_t i) const { return data_[i]; }

    [[nodiscard]] std::size_t index(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
        return ((b * shape_.channels + c) * shape_.height + y) * shape_.width + x;
    }
    Scalar& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) { return data_[index(b, c, y, x)]; }
    [[nodiscard]] Scalar at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
        return data_[index(b, c, y, x)];
    }

    /// View of one (b, c) plane.
    [[nodiscard]] std::span<Scalar> plane(std::size_t b, std::size_t c) {
        return std::span<Scalar>(data_).subspan(index(b, c, 0, 0), shape_.plane());
    }
    [[nodiscard]] std::span<const Scalar> plane(std::size_t b, std::size_t c) const {
        return std::span<const Scalar>(data_).subspan(index(b, c, 0, 0), shape_.plane());
    }

    /// Same data, new extents. Throws DimensionError when element counts differ.
    [[nodiscard]] Tensor reshaped(Shape s) const;

    void fill(Scalar v);
    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(Scalar s);

    [[nodiscard]] bool all_finite() const;

private:
    Shape shape_{};
    std::vector<Scalar> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator*(Tensor a, Scalar s);

/// Largest |a-b| / max(|a|, |b|, floor) over all elements.
Scalar max_relative_error(const Tensor& a, const Tensor& b, Scalar floor = 1e-12);
Scalar max_abs_difference(const Tensor& a, const Tensor& b);

struct ConvSpec {
    std::size_t kernel_h = 1;
    std::size_t kernel_w = 1;
    std::size_t stride_h = 1;
    std::size_t stride_w = 1;
    std::size_t pad_h = 0;
    std::size_t pad_w = 0;
    std::size_t groups = 1;

    static ConvSpec square(std::size_t kernel, std::size_t stride = 1, std::size_t pad = 0,
                           std::size_t groups = 1) {
        return {kernel, kernel, stride, stride, pad, pad, groups};
    }

    /// floor((H + 2P - K)/S) + 1; throws ConfigError when the result would be < 1.
    [[nodiscard]] std::size_t out_height(std::size_t h) const;
    [[nodiscard]] std::size_t out_width(std::size_t w) const;
};

}  // namespace harmonica
