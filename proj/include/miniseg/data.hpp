#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "miniseg/tensor.hpp"

namespace miniseg {

struct Sample {
    Tensor image;  // 1x1xHxW, values in [0, 1]
    Tensor mask;   // 1x1xHxW, values in {0, 1}
};

struct ManifestEntry {
    std::filesystem::path image;  // relative to the manifest directory
    std::filesystem::path mask;
    std::size_t client = 0;
};

// UTF-8 CSV with header "image,mask,client".
struct Manifest {
    std::filesystem::path root;  // directory the relative paths resolve against
    std::vector<ManifestEntry> entries;

    std::size_t size() const noexcept { return entries.size(); }
    std::vector<std::size_t> client_counts() const;
};

// Parses and validates a manifest: header, field count, client ids contiguous
// from 0, and every referenced file present.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Reads the images and masks a manifest refers to. Masks are binarized
// (pixel 0 -> 0, 255 -> 1); any other mask value is rejected.
std::vector<Sample> load_samples(const Manifest& manifest);

// Axis-aligned ellipse in pixel coordinates; pixel (row i, col j) is inside
// when its center (j + 0.5, i + 0.5) satisfies
// ((x - cx) / rx)^2 + ((y - cy) / ry)^2 <= 1.
struct Ellipse {
    double cx;
    double cy;
    double rx;
    double ry;
};

struct SynthConfig {
    std::uint64_t seed = 0;
    std::size_t count = 16;
    std::size_t size = 64;
    double noise_sigma = 0.05;

    void validate() const;
};

inline constexpr double kBackgroundLevel = 0.15;
inline constexpr double kLesionLevel = 0.75;

struct SyntheticSample {
    Sample sample;
    std::vector<Ellipse> lesions;
};

// Sample i is drawn from its own stream derived from (seed, i), so a larger
// count extends a dataset without changing its prefix.
std::vector<SyntheticSample> gen_synthetic(const SynthConfig& cfg);

// Writes img_%05d.pgm / msk_%05d.pgm and manifest.csv into dir. Client ids
// come from partition(count, clients, seed).
Manifest write_synthetic(const SynthConfig& cfg, const std::filesystem::path& dir,
                         std::size_t clients = 1);

// Seeded shuffle then contiguous split into k balanced shards (earlier shards
// take the remainder). Returns the client id of each sample index.
std::vector<std::size_t> partition(std::size_t n_samples, std::size_t k_clients, std::uint64_t seed);

// Seeded permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

struct TrainValSplit {
    Manifest train;
    Manifest val;
};

// Disjoint, exhaustive, seeded; val receives round(n * val_fraction) entries.
TrainValSplit split_train_val(const Manifest& manifest, double val_fraction, std::uint64_t seed);

}  // namespace miniseg
