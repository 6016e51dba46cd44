#include "miniseg/unet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "miniseg/rng.hpp"

namespace miniseg {

void UNetConfig::validate() const {
    if (input_size == 0 || input_size % 16 != 0) {
        throw std::invalid_argument("input_size must be a positive multiple of 16, got " +
                                    std::to_string(input_size));
    }
    for (std::size_t s = 0; s < stage_channels.size(); ++s) {
        if (stage_channels[s] == 0) {
            throw std::invalid_argument("stage_channels[" + std::to_string(s) + "] must be >= 1");
        }
    }
    if (in_channels == 0) throw std::invalid_argument("in_channels must be >= 1");
    if (out_channels == 0) throw std::invalid_argument("out_channels must be >= 1");
}

std::string_view to_string(ParamGroup g) {
    switch (g) {
        case ParamGroup::backbone: return "backbone";
        case ParamGroup::decoder: return "decoder";
        case ParamGroup::head: return "head";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// ParamStore

std::size_t ParamStore::add(std::string name, std::vector<std::size_t> dims, ParamGroup group) {
    if (index_of(name)) throw std::invalid_argument("duplicate parameter name " + name);
    Shape s;
    if (dims.size() == 4) {
        s = Shape{dims[0], dims[1], dims[2], dims[3]};
    } else if (dims.size() == 1) {
        s = Shape{dims[0], 1, 1, 1};
    } else {
        throw std::invalid_argument("parameter " + name + " must have 1 or 4 dims");
    }
    params_.push_back(Param{std::move(name), Tensor(s), Tensor(s), group, false, std::move(dims)});
    return params_.size() - 1;
}

std::optional<std::size_t> ParamStore::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name == name) return i;
    }
    return std::nullopt;
}

const Param* ParamStore::find(std::string_view name) const {
    const auto i = index_of(name);
    return i ? &params_[*i] : nullptr;
}

std::size_t ParamStore::scalar_count() const noexcept {
    std::size_t total = 0;
    for (const auto& p : params_) total += p.value.numel();
    return total;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

void ParamStore::set_group_frozen(ParamGroup group, bool frozen) {
    for (auto& p : params_) {
        if (p.group == group) p.frozen = frozen;
    }
}

bool ParamStore::same_structure(const ParamStore& other) const {
    if (params_.size() != other.params_.size()) return false;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name != other.params_[i].name ||
            params_[i].value.shape() != other.params_[i].value.shape()) {
            return false;
        }
    }
    return true;
}

void ParamStore::copy_values_from(const ParamStore& other) {
    if (!same_structure(other)) throw std::invalid_argument("parameter stores differ in structure");
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].value = other.params_[i].value;
}

// ---------------------------------------------------------------------------
// UNet

UNet::UNet(const UNetConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto& ch = cfg_.stage_channels;
    for (std::size_t s = 0; s < 5; ++s) {
        const std::size_t in = s == 0 ? cfg_.in_channels : ch[s - 1];
        const std::string prefix = "enc" + std::to_string(s);
        encoder_[s].first = add_conv(prefix + ".conv1", in, ch[s], 3, ParamGroup::backbone);
        encoder_[s].second = add_conv(prefix + ".conv2", ch[s], ch[s], 3, ParamGroup::backbone);
    }
    for (std::size_t l = 4; l-- > 0;) {
        const std::size_t up = l == 3 ? ch[4] : ch[l + 1];
        const std::string prefix = "dec" + std::to_string(l);
        decoder_[l].first = add_conv(prefix + ".conv1", ch[l] + up, ch[l], 3, ParamGroup::decoder);
        decoder_[l].second = add_conv(prefix + ".conv2", ch[l], ch[l], 3, ParamGroup::decoder);
    }
    head_ = add_conv("head", ch[0], cfg_.out_channels, 1, ParamGroup::head);

    // Skip connections must meet feature maps of identical spatial size.
    for (std::size_t l = 0; l < 4; ++l) {
        const std::size_t skip = cfg_.input_size >> l;
        const std::size_t up = 2 * (cfg_.input_size >> (l + 1));
        if (skip != up) throw std::logic_error("skip/upsample size mismatch at level " + std::to_string(l));
    }
    init_weights();
}

UNet::Conv UNet::add_conv(const std::string& prefix, std::size_t in, std::size_t out,
                          std::size_t k, ParamGroup group) {
    Conv c;
    c.weight = params_.add(prefix + ".w", {out, in, k, k}, group);
    c.bias = params_.add(prefix + ".b", {out}, group);
    c.pad = (k - 1) / 2;
    return c;
}

void UNet::init_weights() {
    // He (fan-in) normal init for kernels, zero biases, one stream in
    // definition order.
    Xoshiro256 rng(cfg_.seed);
    for (auto& p : params_) {
        if (p.dims.size() != 4) continue;
        const double fan_in = static_cast<double>(p.dims[1] * p.dims[2] * p.dims[3]);
        const double stddev = std::sqrt(2.0 / fan_in);
        for (double& v : p.value.data()) v = stddev * rng.normal();
    }
}

std::size_t UNet::expected_param_count(const UNetConfig& cfg) {
    const auto& ch = cfg.stage_channels;
    auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return out * in * k * k + out; };
    std::size_t total = 0;
    for (std::size_t s = 0; s < 5; ++s) {
        const std::size_t in = s == 0 ? cfg.in_channels : ch[s - 1];
        total += conv(in, ch[s], 3) + conv(ch[s], ch[s], 3);
    }
    for (std::size_t l = 0; l < 4; ++l) {
        const std::size_t up = l == 3 ? ch[4] : ch[l + 1];
        total += conv(ch[l] + up, ch[l], 3) + conv(ch[l], ch[l], 3);
    }
    return total + conv(ch[0], cfg.out_channels, 1);
}

Tensor UNet::conv_forward(const Conv& conv, const Tensor& x) const {
    return conv2d_forward(x, params_[conv.weight].value, params_[conv.bias].value.data(), 1,
                          conv.pad);
}

Tensor UNet::block_forward(const Block& block, const Tensor& x, BlockCache& cache) const {
    cache.first.input = x;
    cache.first.pre = conv_forward(block.first, x);
    cache.second.input = relu(cache.first.pre);
    cache.second.pre = conv_forward(block.second, cache.second.input);
    cache.out = relu(cache.second.pre);
    return cache.out;
}

Tensor UNet::forward(const Tensor& x) {
    const Shape& s = x.shape();
    if (s.c != cfg_.in_channels || s.h != cfg_.input_size || s.w != cfg_.input_size) {
        throw std::invalid_argument("UNet::forward: expected Nx" + std::to_string(cfg_.in_channels) +
                                    "x" + std::to_string(cfg_.input_size) + "x" +
                                    std::to_string(cfg_.input_size) + " input, got " +
                                    to_string(s));
    }
    cache_.reset();
    Cache c;
    Tensor cur = x;
    for (std::size_t stage = 0; stage < 5; ++stage) {
        if (stage > 0) {
            auto pooled = maxpool2x2(cur);
            c.pools[stage - 1] = std::move(pooled.index);
            cur = std::move(pooled.y);
        }
        cur = block_forward(encoder_[stage], cur, c.enc[stage]);
    }
    for (std::size_t l = 4; l-- > 0;) {
        Tensor up = upsample2x_nearest(cur);
        c.up_channels[l] = up.shape().c;
        cur = block_forward(decoder_[l], concat_channels(c.enc[l].out, up), c.dec[l]);
    }
    c.head_input = cur;
    c.probs = sigmoid(conv_forward(head_, cur));
    Tensor probs = c.probs;
    cache_ = std::move(c);
    return probs;
}

void UNet::accumulate(std::size_t index, const Tensor& g) {
    Param& p = params_[index];
    if (p.frozen) return;
    auto dst = p.grad.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void UNet::accumulate(std::size_t index, const std::vector<double>& g) {
    Param& p = params_[index];
    if (p.frozen) return;
    auto dst = p.grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

Tensor UNet::conv_backward(const Conv& conv, const ConvCache& cache, const Tensor& dy,
                           bool need_dx) {
    auto g = conv2d_backward(cache.input, params_[conv.weight].value, dy, 1, conv.pad);
    accumulate(conv.weight, g.dw);
    accumulate(conv.bias, g.db);
    return need_dx ? std::move(g.dx) : Tensor{};
}

Tensor UNet::block_backward(const Block& block, const BlockCache& cache, Tensor dout,
                            bool need_dx) {
    Tensor d = relu_backward(cache.second.pre, dout);
    d = conv_backward(block.second, cache.second, d, true);
    d = relu_backward(cache.first.pre, d);
    return conv_backward(block.first, cache.first, d, need_dx);
}

void UNet::backward(const Tensor& dprobs) {
    if (!cache_) throw std::logic_error("UNet::backward called without a preceding forward");
    Cache c = std::move(*cache_);
    cache_.reset();
    if (dprobs.shape() != c.probs.shape()) {
        throw std::invalid_argument("UNet::backward: dprobs " + to_string(dprobs.shape()) +
                                    " vs output " + to_string(c.probs.shape()));
    }
    for (auto& p : params_) {
        if (p.frozen) p.grad.fill(0.0);
    }

    Tensor d = sigmoid_backward(c.probs, dprobs);
    {
        ConvCache head_cache{c.head_input, Tensor{}};
        d = conv_backward(head_, head_cache, d, true);
    }

    // Gradient arriving at each encoder stage output via its skip connection.
    std::array<Tensor, 4> skip_grad;
    for (std::size_t l = 0; l < 4; ++l) {
        d = block_backward(decoder_[l], c.dec[l], std::move(d), true);
        const std::size_t skip_c = c.enc[l].out.shape().c;
        auto split = concat_channels_backward(d, skip_c);
        skip_grad[l] = std::move(split.a);
        d = upsample2x_nearest_backward(split.b);
    }

    const bool encoder_trainable = std::any_of(params_.begin(), params_.end(), [](const Param& p) {
        return p.group == ParamGroup::backbone && !p.frozen;
    });
    if (!encoder_trainable) return;

    // d is now the gradient at the output of the deepest stage.
    for (std::size_t stage = 5; stage-- > 0;) {
        if (stage < 4) {
            auto dst = d.data();
            auto src = skip_grad[stage].data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
        d = block_backward(encoder_[stage], c.enc[stage], std::move(d), stage > 0);
        if (stage > 0) d = maxpool2x2_backward(c.pools[stage - 1], d);
    }
}

std::optional<Shape> UNet::stage_output_shape(std::size_t stage) const {
    if (!cache_ || stage >= cache_->enc.size()) return std::nullopt;
    return cache_->enc[stage].out.shape();
}

void UNet::set_backbone_frozen(bool frozen) { params_.set_group_frozen(ParamGroup::backbone, frozen); }

bool UNet::backbone_frozen() const {
    return std::all_of(params_.begin(), params_.end(), [](const Param& p) {
        return p.group != ParamGroup::backbone || p.frozen;
    });
}

}  // namespace miniseg
