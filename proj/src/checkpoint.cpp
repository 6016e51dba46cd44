#include "miniseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <string>

#include "miniseg/error.hpp"

namespace miniseg {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'M', 'U', 'N', '1'};
constexpr char kInputSizeRecord[] = "meta.input_size";
constexpr std::uint8_t kDtypeF32 = 0;

class Writer {
public:
    template <typename T>
    void put(T v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        out_.insert(out_.end(), p, p + sizeof(T));
    }
    void put_bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        out_.insert(out_.end(), p, p + n);
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::span<const std::uint8_t> get_bytes(std::size_t n, const char* what) {
        need(n, what);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t n, const char* what) {
        if (remaining() < n) {
            throw FormatError(std::string("checkpoint truncated while reading ") + what, pos_);
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void put_record(Writer& w, const std::string& name, const std::vector<std::size_t>& dims,
                std::span<const double> values) {
    w.put(static_cast<std::uint16_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put(kDtypeF32);
    w.put(static_cast<std::uint8_t>(dims.size()));
    for (auto d : dims) w.put(static_cast<std::uint32_t>(d));
    for (double v : values) w.put(static_cast<float>(v));
}

struct Record {
    std::string name;
    std::vector<std::size_t> dims;
    std::vector<float> values;
    std::size_t offset;
};

Record get_record(Reader& r) {
    Record rec;
    rec.offset = r.pos();
    const auto name_len = r.get<std::uint16_t>("name length");
    const auto name = r.get_bytes(name_len, "name");
    rec.name.assign(name.begin(), name.end());
    const std::size_t dtype_at = r.pos();
    const auto dtype = r.get<std::uint8_t>("dtype");
    if (dtype != kDtypeF32) {
        throw FormatError("unsupported dtype " + std::to_string(dtype) + " for " + rec.name, dtype_at);
    }
    const auto ndim = r.get<std::uint8_t>("ndim");
    std::size_t numel = 1;
    for (std::uint8_t i = 0; i < ndim; ++i) {
        const std::size_t dim_at = r.pos();
        const auto d = r.get<std::uint32_t>("dims");
        if (d == 0) throw FormatError("zero dimension in " + rec.name, dim_at);
        if (numel > r.remaining() / 4 / d) {
            throw FormatError("dimensions of " + rec.name + " exceed the remaining file size", dim_at);
        }
        numel *= d;
        rec.dims.push_back(d);
    }
    const auto payload = r.get_bytes(numel * 4, "payload");
    rec.values.resize(numel);
    std::memcpy(rec.values.data(), payload.data(), payload.size());
    return rec;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const UNet& model) {
    Writer w;
    w.put_bytes(kMagic, 4);
    w.put(kCheckpointVersion);
    w.put(static_cast<std::uint32_t>(model.params().size() + 1));
    for (const auto& p : model.params()) put_record(w, p.name, p.dims, p.value.data());
    const double input_size = static_cast<double>(model.config().input_size);
    put_record(w, kInputSizeRecord, {1}, std::span<const double>(&input_size, 1));
    return w.take();
}

UNet decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    const auto magic = r.get_bytes(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("bad checkpoint magic", 0);
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
    }
    const auto count = r.get<std::uint32_t>("tensor count");

    std::vector<Record> records;
    std::map<std::string, std::size_t, std::less<>> by_name;
    for (std::uint32_t i = 0; i < count; ++i) {
        Record rec = get_record(r);
        if (!by_name.emplace(rec.name, records.size()).second) {
            throw FormatError("duplicate tensor " + rec.name, rec.offset);
        }
        records.push_back(std::move(rec));
    }
    if (r.remaining() != 0) throw FormatError("trailing bytes after last tensor", r.pos());

    auto require = [&](const std::string& name) -> const Record& {
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw FormatError("missing tensor " + name, bytes.size());
        return records[it->second];
    };

    // Rebuild the architecture from the kernel shapes.
    UNetConfig cfg;
    const Record& meta = require(kInputSizeRecord);
    if (meta.values.size() != 1 || !(meta.values[0] >= 16.0f) ||
        meta.values[0] > static_cast<float>(1 << 20)) {
        throw FormatError("invalid " + std::string(kInputSizeRecord), meta.offset);
    }
    cfg.input_size = static_cast<std::size_t>(meta.values[0]);
    for (std::size_t s = 0; s < 5; ++s) {
        const Record& w = require("enc" + std::to_string(s) + ".conv1.w");
        if (w.dims.size() != 4) throw FormatError("kernel " + w.name + " must be 4-D", w.offset);
        cfg.stage_channels[s] = w.dims[0];
        if (s == 0) cfg.in_channels = w.dims[1];
    }
    const Record& head = require("head.w");
    if (head.dims.size() != 4) throw FormatError("kernel head.w must be 4-D", head.offset);
    cfg.out_channels = head.dims[0];
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("checkpoint describes an invalid model: ") + e.what(), 12);
    }

    UNet model(cfg);
    if (records.size() != model.params().size() + 1) {
        throw FormatError("tensor count " + std::to_string(records.size()) + " does not match the model (" +
                              std::to_string(model.params().size() + 1) + ")",
                          8);
    }
    for (auto& p : model.params()) {
        const Record& rec = require(p.name);
        if (rec.dims != p.dims) throw FormatError("shape mismatch for " + p.name, rec.offset);
        auto dst = p.value.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<double>(rec.values[i]);
    }
    return model;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading", path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed", path);
    return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing", path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed", path);
}

void save_checkpoint(const UNet& model, const std::filesystem::path& path) {
    write_file(path, encode_checkpoint(model));
}

UNet load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace miniseg
