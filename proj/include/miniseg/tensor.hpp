#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace miniseg {

// (n, c, h, w) extents of a dense 4-D tensor.
struct Shape {
    std::size_t n = 1;
    std::size_t c = 1;
    std::size_t h = 1;
    std::size_t w = 1;

    std::size_t numel() const noexcept { return n * c * h * w; }
    std::size_t plane() const noexcept { return h * w; }
    bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);
std::ostream& operator<<(std::ostream& os, const Shape& s);

// Dense row-major NCHW tensor of doubles. Value type; copies are deep.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t numel() const noexcept { return data_.size(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[offset(n, c, h, w)];
    }
    double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[offset(n, c, h, w)];
    }

    void fill(double v);

    // Sample n of a batch as a 1×C×H×W tensor.
    Tensor slice_batch(std::size_t n) const;
    // Copies `src` (1×C×H×W) into batch slot n.
    void set_batch(std::size_t n, const Tensor& src);

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_{};
    std::vector<double> data_ = std::vector<double>(1, 0.0);
};

// Stacks 1×C×H×W tensors along n. All parts must share c, h, w.
Tensor stack_batch(std::span<const Tensor* const> parts);

}  // namespace miniseg
