#pragma once

// Forward and backward passes of the layer primitives used by the U-Net.
// All functions are pure: they read their inputs and return fresh tensors.

#include <cstddef>
#include <span>
#include <vector>

#include "miniseg/tensor.hpp"

namespace miniseg {

struct ConvGrads {
    Tensor dx;
    Tensor dw;
    std::vector<double> db;
};

// w has shape (outC, inC, kh, kw); b has outC entries. Borders are zero padded.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, std::span<const double> b,
                      std::size_t stride = 1, std::size_t pad = 0);

ConvGrads conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy,
                          std::size_t stride = 1, std::size_t pad = 0);

Tensor relu(const Tensor& x);
// Routes dy where x > 0; x == 0 routes nothing.
Tensor relu_backward(const Tensor& x, const Tensor& dy);

// For every pooled output cell, the flat index into the input tensor of the
// winning element of its 2x2 window.
struct PoolIndex {
    Shape input_shape;
    Shape output_shape;
    std::vector<std::size_t> argmax;
};

struct PoolResult {
    Tensor y;
    PoolIndex index;
};

// Ties go to the lowest flat index (top-left first, then row-major).
PoolResult maxpool2x2(const Tensor& x);
Tensor maxpool2x2_backward(const PoolIndex& index, const Tensor& dy);

Tensor upsample2x_nearest(const Tensor& x);
// Sums each 2x2 block of dy.
Tensor upsample2x_nearest_backward(const Tensor& dy);

// a's channels come first.
Tensor concat_channels(const Tensor& a, const Tensor& b);

struct ChannelSplit {
    Tensor a;
    Tensor b;
};
ChannelSplit concat_channels_backward(const Tensor& dy, std::size_t a_channels);

Tensor sigmoid(const Tensor& x);
// Takes the forward output y, not x.
Tensor sigmoid_backward(const Tensor& y, const Tensor& dy);

inline constexpr double kProbClamp = 1e-7;
inline constexpr double kDiceSmooth = 1.0;

struct LossResult {
    double loss = 0.0;
    double bce = 0.0;
    double dice_loss = 0.0;
    Tensor dpred;
};

// Mean binary cross-entropy over all elements plus the mean over samples of
// (1 - soft Dice), where soft Dice = (2 sum(p m) + 1) / (sum p + sum m + 1)
// is taken per sample over (c, h, w). Probabilities are clamped to
// [1e-7, 1 - 1e-7]; dpred is evaluated at the clamped value.
LossResult bce_dice_loss(const Tensor& pred, const Tensor& mask);

}  // namespace miniseg
