#include "miniseg/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "miniseg/checkpoint.hpp"
#include "miniseg/error.hpp"

namespace miniseg {

namespace {

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

class HeaderParser {
public:
    explicit HeaderParser(std::span<const std::uint8_t> bytes) : b_(bytes) {}

    std::size_t number(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        last_start_ = start;
        std::size_t v = 0;
        while (pos_ < b_.size() && b_[pos_] >= '0' && b_[pos_] <= '9') {
            v = v * 10 + (b_[pos_] - '0');
            if (v > std::numeric_limits<std::uint32_t>::max()) {
                throw FormatError(std::string("PGM ") + what + " too large", start);
            }
            ++pos_;
        }
        if (pos_ == start) throw FormatError(std::string("PGM: expected ") + what, pos_);
        return v;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    void single_space() {
        if (pos_ >= b_.size() || !is_space(b_[pos_])) {
            throw FormatError("PGM: expected whitespace after maxval", pos_);
        }
        ++pos_;
    }

    std::size_t pos() const noexcept { return pos_; }
    // Offset of the first digit of the last number read.
    std::size_t last_start() const noexcept { return last_start_; }

private:
    void skip_space_and_comments() {
        for (;;) {
            while (pos_ < b_.size() && is_space(b_[pos_])) ++pos_;
            if (pos_ < b_.size() && b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
                continue;
            }
            return;
        }
    }

    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 2;
    std::size_t last_start_ = 2;
};

}  // namespace

GrayImage parse_pgm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P') throw FormatError("not a PGM file", 0);
    if (bytes[1] == '2') throw FormatError("ASCII PGM (P2) is not supported, only P5", 1);
    if (bytes[1] != '5') throw FormatError("unsupported netpbm variant P" + std::string(1, static_cast<char>(bytes[1])), 1);

    HeaderParser h(bytes);
    GrayImage img;
    img.width = h.number("width");
    img.height = h.number("height");
    const std::size_t maxval = h.number("maxval");
    if (maxval != 255) {
        throw FormatError("PGM maxval must be 255, got " + std::to_string(maxval), h.last_start());
    }
    h.single_space();
    if (img.width == 0 || img.height == 0) throw FormatError("PGM has an empty raster", h.pos());

    const std::size_t header = h.pos();
    const std::size_t need = img.width * img.height;
    const std::size_t have = bytes.size() - header;
    if (have < need) {
        throw FormatError("PGM payload truncated: expected " + std::to_string(need) + " bytes, found " +
                              std::to_string(have),
                          header + have);
    }
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                      bytes.begin() + static_cast<std::ptrdiff_t>(header + need));
    return img;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
    if (img.pixels.size() != img.width * img.height) {
        throw std::invalid_argument("encode_pgm: pixel count does not match width*height");
    }
    const std::string header =
        "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

Tensor to_tensor(const GrayImage& img) {
    Tensor t(Shape{1, 1, img.height, img.width});
    for (std::size_t i = 0; i < img.pixels.size(); ++i) t[i] = img.pixels[i] / 255.0;
    return t;
}

GrayImage from_tensor(const Tensor& t) {
    const Shape& s = t.shape();
    if (s.n != 1 || s.c != 1) {
        throw std::invalid_argument("from_tensor: expected a 1x1xHxW tensor, got " + to_string(s));
    }
    GrayImage img{s.w, s.h, std::vector<std::uint8_t>(t.numel())};
    for (std::size_t i = 0; i < t.numel(); ++i) {
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(t[i], 0.0, 1.0) * 255.0));
    }
    return img;
}

Tensor read_pgm(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return to_tensor(parse_pgm(bytes));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.message(), e.offset());
    }
}

void write_pgm(const std::filesystem::path& path, const Tensor& image) {
    write_file(path, encode_pgm(from_tensor(image)));
}

}  // namespace miniseg
