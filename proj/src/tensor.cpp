#include "miniseg/tensor.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace miniseg {

namespace {

void check_shape(const Shape& s) {
    if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0) {
        throw std::invalid_argument("tensor shape components must be >= 1, got " + to_string(s));
    }
}

}  // namespace

std::string to_string(const Shape& s) {
    return std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" +
           std::to_string(s.w);
}

std::ostream& operator<<(std::ostream& os, const Shape& s) { return os << to_string(s); }

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
    check_shape(shape_);
    data_.assign(shape_.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_.numel()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + to_string(shape_));
    }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::slice_batch(std::size_t n) const {
    if (n >= shape_.n) throw std::out_of_range("batch index out of range");
    Shape s = shape_;
    s.n = 1;
    const std::size_t len = s.numel();
    auto first = data_.begin() + static_cast<std::ptrdiff_t>(n * len);
    return Tensor(s, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(len)));
}

void Tensor::set_batch(std::size_t n, const Tensor& src) {
    const Shape& s = src.shape();
    if (n >= shape_.n || s.n != 1 || s.c != shape_.c || s.h != shape_.h || s.w != shape_.w) {
        throw std::invalid_argument("set_batch: cannot place " + to_string(s) + " into slot " +
                                    std::to_string(n) + " of " + to_string(shape_));
    }
    std::copy(src.data().begin(), src.data().end(),
              data_.begin() + static_cast<std::ptrdiff_t>(n * s.numel()));
}

Tensor stack_batch(std::span<const Tensor* const> parts) {
    if (parts.empty()) throw std::invalid_argument("stack_batch: no tensors");
    Shape s = parts.front()->shape();
    s.n = parts.size();
    Tensor out(s);
    for (std::size_t i = 0; i < parts.size(); ++i) out.set_batch(i, *parts[i]);
    return out;
}

}  // namespace miniseg
