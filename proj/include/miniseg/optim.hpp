#pragma once

#include <cstddef>
#include <vector>

#include "miniseg/unet.hpp"

namespace miniseg {

struct SgdConfig {
    double momentum = 0.9;
    double weight_decay = 0.0;

    void validate() const;
};

// Momentum SGD. Velocity buffers are created lazily, zero-initialized, and
// matched to parameters by position in the store.
class Sgd {
public:
    explicit Sgd(SgdConfig cfg = {});

    // For each non-frozen parameter:
    //   v <- momentum * v + g + weight_decay * p
    //   p <- p - lr * v
    // Frozen parameters and their velocity are left untouched. All grads are
    // zeroed afterwards.
    void step(ParamStore& params, double lr);

    void reset() { velocity_.clear(); }
    const SgdConfig& config() const noexcept { return cfg_; }
    const std::vector<Tensor>& velocity() const noexcept { return velocity_; }

private:
    SgdConfig cfg_;
    std::vector<Tensor> velocity_;
};

struct ScheduleConfig {
    double lr_init = 1e-5;
    double lr_max = 1e-4;
    double lr_min = 1e-6;
    std::size_t warmup_epochs = 1;
    std::size_t total_epochs = 10;

    void validate() const;
};

// Per-epoch learning rate, epoch is 1-based. Warmup epochs hold lr_init;
// afterwards a half cosine runs from lr_max (first post-warmup epoch) down to
// lr_min (last epoch).
double lr_at_epoch(std::size_t epoch, const ScheduleConfig& cfg);

}  // namespace miniseg
