#include "miniseg/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace miniseg {

void SgdConfig::validate() const {
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw std::invalid_argument("momentum must be in [0, 1), got " + std::to_string(momentum));
    }
    if (!(weight_decay >= 0.0)) {
        throw std::invalid_argument("weight_decay must be >= 0, got " + std::to_string(weight_decay));
    }
}

Sgd::Sgd(SgdConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void Sgd::step(ParamStore& params, double lr) {
    if (velocity_.size() != params.size()) {
        velocity_.clear();
        velocity_.reserve(params.size());
        for (const auto& p : params) velocity_.emplace_back(p.value.shape());
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = params[i];
        if (p.frozen) continue;
        auto v = velocity_[i].data();
        auto w = p.value.data();
        auto g = p.grad.data();
        for (std::size_t k = 0; k < w.size(); ++k) {
            v[k] = cfg_.momentum * v[k] + g[k];
            if (cfg_.weight_decay != 0.0) v[k] += cfg_.weight_decay * w[k];
            w[k] -= lr * v[k];
        }
    }
    params.zero_grad();
}

void ScheduleConfig::validate() const {
    if (!(lr_min > 0.0)) throw std::invalid_argument("lr_min must be > 0");
    if (!(lr_min <= lr_init && lr_init <= lr_max)) {
        throw std::invalid_argument("learning rates must satisfy lr_min <= lr_init <= lr_max");
    }
    if (total_epochs == 0) throw std::invalid_argument("total_epochs must be >= 1");
    if (warmup_epochs >= total_epochs) {
        throw std::invalid_argument("warmup_epochs must be < total_epochs");
    }
}

double lr_at_epoch(std::size_t epoch, const ScheduleConfig& cfg) {
    cfg.validate();
    if (epoch < 1 || epoch > cfg.total_epochs) {
        throw std::out_of_range("epoch " + std::to_string(epoch) + " outside [1, " +
                                std::to_string(cfg.total_epochs) + "]");
    }
    if (epoch <= cfg.warmup_epochs) return cfg.lr_init;
    const std::size_t span = cfg.total_epochs - cfg.warmup_epochs - 1;
    if (span == 0) return cfg.lr_max;
    const double t = static_cast<double>(epoch - cfg.warmup_epochs - 1) / static_cast<double>(span);
    return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace miniseg
