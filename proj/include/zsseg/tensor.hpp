#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace zsseg {

using Real = double;

// Channel-major (C x H x W) storage for a single sample.  The W x H x C
// layout used in the docs is the same data viewed pixel-first.
struct Shape {
    int channels = 0;
    int height = 0;
    int width = 0;

    [[nodiscard]] std::size_t size() const noexcept {
        return static_cast<std::size_t>(channels) * height * width;
    }
    [[nodiscard]] std::size_t plane() const noexcept {
        return static_cast<std::size_t>(height) * width;
    }
    friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
    return "(" + std::to_string(s.channels) + "," + std::to_string(s.height) + "," +
           std::to_string(s.width) + ")";
}

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void expect_shape(const Shape& got, const Shape& want, const char* what) {
    if (got != want) {
        throw ShapeError(std::string(what) + ": expected shape " + to_string(want) + ", got " +
                         to_string(got));
    }
}

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, Real fill = 0.0) : shape_(shape), data_(shape.size(), fill) {}
    Tensor(int c, int h, int w, Real fill = 0.0) : Tensor(Shape{c, h, w}, fill) {}

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] int channels() const noexcept { return shape_.channels; }
    [[nodiscard]] int height() const noexcept { return shape_.height; }
    [[nodiscard]] int width() const noexcept { return shape_.width; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    Real& operator()(int c, int y, int x) noexcept {
        return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
    }
    Real operator()(int c, int y, int x) const noexcept {
        return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
    }
    Real& operator[](std::size_t i) noexcept { return data_[i]; }
    Real operator[](std::size_t i) const noexcept { return data_[i]; }

    [[nodiscard]] Real* data() noexcept { return data_.data(); }
    [[nodiscard]] const Real* data() const noexcept { return data_.data(); }
    [[nodiscard]] std::span<Real> values() noexcept { return data_; }
    [[nodiscard]] std::span<const Real> values() const noexcept { return data_; }
    [[nodiscard]] std::span<Real> channel(int c) noexcept {
        return {data_.data() + static_cast<std::size_t>(c) * shape_.plane(), shape_.plane()};
    }
    [[nodiscard]] std::span<const Real> channel(int c) const noexcept {
        return {data_.data() + static_cast<std::size_t>(c) * shape_.plane(), shape_.plane()};
    }

    void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor& operator+=(const Tensor& o) {
        expect_shape(o.shape_, shape_, "Tensor::operator+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator*=(Real s) {
        for (auto& v : data_) v *= s;
        return *this;
    }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_{};
    std::vector<Real> data_;
};

inline Tensor operator+(Tensor a, const Tensor& b) {
    a += b;
    return a;
}

[[nodiscard]] inline Real sum(const Tensor& t) {
    Real s = 0.0;
    for (Real v : t.values()) s += v;
    return s;
}

[[nodiscard]] inline Real max_abs_diff(const Tensor& a, const Tensor& b) {
    expect_shape(b.shape(), a.shape(), "max_abs_diff");
    Real m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace zsseg
