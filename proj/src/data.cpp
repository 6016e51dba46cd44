#include "miniseg/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "miniseg/error.hpp"
#include "miniseg/pgm.hpp"
#include "miniseg/rng.hpp"

namespace miniseg {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kPartitionStream = 0x7061727469746e;  // "partitn"
constexpr std::uint64_t kSplitStream = 0x73706c6974;         // "split"

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::size_t parse_count(const std::string& s, const std::string& where) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw std::invalid_argument(where + ": client id '" + s + "' is not a non-negative integer");
    }
    return std::stoull(s);
}

}  // namespace

std::vector<std::size_t> Manifest::client_counts() const {
    std::vector<std::size_t> counts;
    for (const auto& e : entries) {
        if (e.client >= counts.size()) counts.resize(e.client + 1, 0);
        ++counts[e.client];
    }
    return counts;
}

Manifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest", path);
    Manifest m;
    m.root = path.parent_path();

    std::string line;
    std::size_t line_no = 0;
    auto where = [&] { return path.string() + ":" + std::to_string(line_no); };
    if (!std::getline(in, line)) throw std::invalid_argument(path.string() + ": empty manifest");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "image,mask,client") {
        throw std::invalid_argument(where() + ": expected header 'image,mask,client'");
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 3) throw std::invalid_argument(where() + ": expected 3 fields");
        ManifestEntry e{f[0], f[1], parse_count(f[2], where())};
        for (const auto& p : {e.image, e.mask}) {
            if (!fs::exists(m.root / p)) throw IoError(where() + ": referenced file missing", m.root / p);
        }
        m.entries.push_back(std::move(e));
    }
    const auto counts = m.client_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) {
            throw std::invalid_argument(path.string() + ": client ids not contiguous, no rows for client " +
                                        std::to_string(c));
        }
    }
    return m;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing", path);
    out << "image,mask,client\n";
    for (const auto& e : manifest.entries) {
        out << e.image.generic_string() << ',' << e.mask.generic_string() << ',' << e.client << '\n';
    }
    if (!out) throw IoError("write failed", path);
}

std::vector<Sample> load_samples(const Manifest& manifest) {
    std::vector<Sample> samples;
    samples.reserve(manifest.size());
    for (const auto& e : manifest.entries) {
        Sample s{read_pgm(manifest.root / e.image), read_pgm(manifest.root / e.mask)};
        if (s.image.shape() != s.mask.shape()) {
            throw std::invalid_argument("image/mask size mismatch for " + e.image.string());
        }
        for (double& v : s.mask.data()) {
            if (v != 0.0 && v != 1.0) {
                throw std::invalid_argument("mask " + e.mask.string() + " is not binary (0/255)");
            }
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

void SynthConfig::validate() const {
    if (count < 1) throw std::invalid_argument("count must be ≥ 1");
    if (size == 0 || size % 16 != 0) {
        throw std::invalid_argument("size must be a positive multiple of 16, got " + std::to_string(size));
    }
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");
}

std::vector<SyntheticSample> gen_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    const double sz = static_cast<double>(cfg.size);
    std::vector<SyntheticSample> out;
    out.reserve(cfg.count);
    for (std::size_t i = 0; i < cfg.count; ++i) {
        Xoshiro256 rng(derive_seed(cfg.seed, i));
        SyntheticSample s;
        const std::size_t lesions = 1 + static_cast<std::size_t>(rng.below(3));
        for (std::size_t k = 0; k < lesions; ++k) {
            Ellipse e;
            e.cx = rng.uniform(0.2 * sz, 0.8 * sz);
            e.cy = rng.uniform(0.2 * sz, 0.8 * sz);
            e.rx = rng.uniform(0.08 * sz, 0.22 * sz);
            e.ry = rng.uniform(0.08 * sz, 0.22 * sz);
            s.lesions.push_back(e);
        }
        const Shape shape{1, 1, cfg.size, cfg.size};
        s.sample.image = Tensor(shape, kBackgroundLevel);
        s.sample.mask = Tensor(shape, 0.0);
        for (std::size_t r = 0; r < cfg.size; ++r) {
            for (std::size_t c = 0; c < cfg.size; ++c) {
                const double x = static_cast<double>(c) + 0.5;
                const double y = static_cast<double>(r) + 0.5;
                for (const auto& e : s.lesions) {
                    const double dx = (x - e.cx) / e.rx;
                    const double dy = (y - e.cy) / e.ry;
                    if (dx * dx + dy * dy <= 1.0) {
                        s.sample.mask.at(0, 0, r, c) = 1.0;
                        s.sample.image.at(0, 0, r, c) = kLesionLevel;
                        break;
                    }
                }
            }
        }
        if (cfg.noise_sigma > 0.0) {
            for (double& v : s.sample.image.data()) {
                v = std::clamp(v + cfg.noise_sigma * rng.normal(), 0.0, 1.0);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

Manifest write_synthetic(const SynthConfig& cfg, const fs::path& dir, std::size_t clients) {
    const auto samples = gen_synthetic(cfg);
    const auto assignment = partition(cfg.count, clients, cfg.seed);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory", dir);

    Manifest m;
    m.root = dir;
    char name[32];
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::snprintf(name, sizeof name, "img_%05zu.pgm", i);
        const fs::path img = name;
        std::snprintf(name, sizeof name, "msk_%05zu.pgm", i);
        const fs::path msk = name;
        write_pgm(dir / img, samples[i].sample.image);
        write_pgm(dir / msk, samples[i].sample.mask);
        m.entries.push_back({img, msk, assignment[i]});
    }
    save_manifest(m, dir / "manifest.csv");
    return m;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Xoshiro256 rng(seed);
    rng.shuffle(std::span<std::size_t>(idx));
    return idx;
}

std::vector<std::size_t> partition(std::size_t n_samples, std::size_t k_clients, std::uint64_t seed) {
    if (k_clients < 1) throw std::invalid_argument("k_clients must be >= 1");
    if (k_clients > n_samples) {
        throw std::invalid_argument("cannot partition " + std::to_string(n_samples) + " samples among " +
                                    std::to_string(k_clients) + " clients");
    }
    const auto order = shuffled_indices(n_samples, derive_seed(seed, kPartitionStream));
    std::vector<std::size_t> assignment(n_samples);
    const std::size_t base = n_samples / k_clients;
    const std::size_t extra = n_samples % k_clients;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < k_clients; ++c) {
        const std::size_t len = base + (c < extra ? 1 : 0);
        for (std::size_t i = 0; i < len; ++i) assignment[order[pos++]] = c;
    }
    return assignment;
}

TrainValSplit split_train_val(const Manifest& manifest, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw std::invalid_argument("val_fraction must be in (0, 1)");
    }
    const std::size_t n = manifest.size();
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction));
    if (n_val == 0 || n_val >= n) {
        throw std::invalid_argument("split of " + std::to_string(n) + " samples at fraction " +
                                    std::to_string(val_fraction) + " leaves one side empty");
    }
    auto order = shuffled_indices(n, derive_seed(seed, kSplitStream));
    std::vector<bool> is_val(n, false);
    for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
    TrainValSplit out{Manifest{manifest.root, {}}, Manifest{manifest.root, {}}};
    // Entries keep their manifest order on both sides.
    for (std::size_t i = 0; i < n; ++i) {
        (is_val[i] ? out.val : out.train).entries.push_back(manifest.entries[i]);
    }
    return out;
}

}  // namespace miniseg
