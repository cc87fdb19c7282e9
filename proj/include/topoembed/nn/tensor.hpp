#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace topoembed::nn {

/// NCHW extent. Vectors use (n, features, 1, 1).
struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t size() const noexcept {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(w);
    }
    std::size_t sample_size() const noexcept { return static_cast<std::size_t>(c) * h * w; }
    std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {}
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::vector<double>& values() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double& at(int n, int c, int h, int w) noexcept { return data_[index(n, c, h, w)]; }
    double at(int n, int c, int h, int w) const noexcept { return data_[index(n, c, h, w)]; }

    std::size_t index(int n, int c, int h, int w) const noexcept {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }

    /// Same data, new extent; total size must match.
    Tensor reshaped(Shape shape) const;

    /// Copy of samples [first, first+count).
    Tensor slice(int first, int count) const;

    bool all_finite() const noexcept;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Concatenates along the channel axis; batch and spatial extents must match.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Extracts channel `c` of every sample as a single-channel tensor.
Tensor channel(const Tensor& t, int c);

/// Stacks equal-shape single samples along the batch axis.
Tensor stack(const std::vector<Tensor>& samples);

/// Bilinear resize with half-pixel centers (align_corners = false).
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);

} // namespace topoembed::nn
