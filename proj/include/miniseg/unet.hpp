#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "miniseg/kernels.hpp"
#include "miniseg/tensor.hpp"

namespace miniseg {

struct UNetConfig {
    std::size_t input_size = 64;
    std::array<std::size_t, 5> stage_channels{16, 32, 64, 128, 128};
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::uint64_t seed = 0;

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
    bool operator==(const UNetConfig&) const = default;
};

enum class ParamGroup : std::uint8_t { backbone, decoder, head };

std::string_view to_string(ParamGroup g);

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    ParamGroup group = ParamGroup::backbone;
    bool frozen = false;
    // Logical dimensions as serialized: 4 for kernels, 1 for biases.
    std::vector<std::size_t> dims;
};

// Parameters in definition order. The order is part of the checkpoint format
// and fixes the reduction order of every aggregation, so it never changes
// after construction.
class ParamStore {
public:
    std::size_t add(std::string name, std::vector<std::size_t> dims, ParamGroup group);

    std::size_t size() const noexcept { return params_.size(); }
    Param& operator[](std::size_t i) { return params_[i]; }
    const Param& operator[](std::size_t i) const { return params_[i]; }
    auto begin() noexcept { return params_.begin(); }
    auto end() noexcept { return params_.end(); }
    auto begin() const noexcept { return params_.begin(); }
    auto end() const noexcept { return params_.end(); }

    const Param* find(std::string_view name) const;
    std::optional<std::size_t> index_of(std::string_view name) const;

    // Total number of scalar parameters.
    std::size_t scalar_count() const noexcept;

    void zero_grad();
    void set_group_frozen(ParamGroup group, bool frozen);

    // Copies parameter values (not grads, not flags) from a store with the
    // same structure.
    void copy_values_from(const ParamStore& other);
    bool same_structure(const ParamStore& other) const;

private:
    std::vector<Param> params_;
};

// Miniature VGG-style U-Net:
//   encoder  5 stages of (conv3x3 + ReLU) x2, 2x2 max-pool between stages
//   decoder  4 up-blocks: nearest upsample x2, concat(skip, up), (conv3x3 + ReLU) x2
//   head     conv1x1 -> sigmoid
// Parameter names: enc{s}.conv{1,2}.{w,b}, dec{l}.conv{1,2}.{w,b}, head.{w,b},
// where dec{l} fuses encoder stage l. Definition order is enc0..enc4,
// dec3..dec0, head.
class UNet {
public:
    explicit UNet(const UNetConfig& cfg);

    const UNetConfig& config() const noexcept { return cfg_; }
    ParamStore& params() noexcept { return params_; }
    const ParamStore& params() const noexcept { return params_; }

    // x is N x in_channels x input_size x input_size. Returns probabilities.
    // Caches activations for the next backward().
    Tensor forward(const Tensor& x);

    // Accumulates into the grads of non-frozen parameters; frozen grads are
    // left at zero. Consumes the activation cache.
    void backward(const Tensor& dprobs);

    // Shape of encoder stage output `stage` from the last forward(), if any.
    std::optional<Shape> stage_output_shape(std::size_t stage) const;

    void set_backbone_frozen(bool frozen);
    bool backbone_frozen() const;

    // Layer-by-layer closed-form parameter count for a config.
    static std::size_t expected_param_count(const UNetConfig& cfg);

private:
    struct Conv {
        std::size_t weight;
        std::size_t bias;
        std::size_t pad;
    };
    struct ConvCache {
        Tensor input;
        Tensor pre;  // pre-activation
    };
    struct Block {
        Conv first;
        Conv second;
    };
    struct BlockCache {
        ConvCache first;
        ConvCache second;
        Tensor out;
    };

    Conv add_conv(const std::string& prefix, std::size_t in, std::size_t out, std::size_t k,
                  ParamGroup group);
    Tensor conv_forward(const Conv& conv, const Tensor& x) const;
    Tensor block_forward(const Block& block, const Tensor& x, BlockCache& cache) const;
    // Returns gradient w.r.t. the block input (unless need_dx is false).
    Tensor block_backward(const Block& block, const BlockCache& cache, Tensor dout, bool need_dx);
    Tensor conv_backward(const Conv& conv, const ConvCache& cache, const Tensor& dy, bool need_dx);
    void accumulate(std::size_t index, const Tensor& g);
    void accumulate(std::size_t index, const std::vector<double>& g);
    void init_weights();

    UNetConfig cfg_;
    ParamStore params_;
    std::array<Block, 5> encoder_{};
    std::array<Block, 4> decoder_{};  // indexed by skip level 0..3
    Conv head_{};

    struct Cache {
        std::array<BlockCache, 5> enc;
        std::array<PoolIndex, 4> pools;  // pools[s] feeds stage s + 1
        std::array<BlockCache, 4> dec;
        std::array<std::size_t, 4> up_channels{};
        Tensor head_input;
        Tensor probs;
    };
    std::optional<Cache> cache_;
};

}  // namespace miniseg
