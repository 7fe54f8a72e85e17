#include "wavreg/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "wavreg/errors.hpp"

namespace wavreg {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'W', 'W', 'R', 'N'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in bounded pieces.
    std::size_t done = 0;
    while (done < bytes.size()) {
        const std::size_t piece = std::min<std::size_t>(bytes.size() - done, 1u << 30);
        crc = crc32(crc, bytes.data() + done, static_cast<uInt>(piece));
        done += piece;
    }
    return static_cast<std::uint32_t>(crc);
}

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, std::size_t end) : bytes_(bytes), end_(end) {}

    std::size_t offset() const { return pos_; }
    bool done() const { return pos_ >= end_; }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::span<const std::uint8_t> take(std::size_t n, const char* what) {
        need(n, what);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n, const char* what) {
        if (n > end_ - pos_)
            throw FormatError(std::string("checkpoint truncated while reading ") + what, pos_);
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

void put_record(std::vector<std::uint8_t>& out, const NamedTensor& t) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    put_bytes(out, t.name.data(), t.name.size());
    put_u32(out, static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    put_bytes(out, t.value.data().data(), t.value.size() * sizeof(float));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
    std::vector<std::uint8_t> out;
    put_bytes(out, kMagic, 4);
    put_u32(out, kCheckpointVersion);
    const std::string cfg = serialize(model.config());
    put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    put_bytes(out, cfg.data(), cfg.size());
    for (const auto& p : model.parameters()) put_record(out, p);
    for (const auto& b : model.buffers()) put_record(out, b);
    put_u32(out, crc32_of(out));
    return out;
}

Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw FormatError("checkpoint is empty", 0);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError("checkpoint magic is not 'WWRN'", 0);
    if (bytes.size() < 12) throw FormatError("checkpoint truncated in its header", bytes.size());

    Reader r(bytes, bytes.size() - 4);
    r.take(4, "magic");
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")", 4);
    const std::size_t cfg_at = r.offset();
    const auto cfg_len = r.u32("config length");
    const auto cfg_bytes = r.take(cfg_len, "config block");
    ModelConfig cfg;
    try {
        cfg = parse_model_config(std::string(cfg_bytes.begin(), cfg_bytes.end()));
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint config block: ") + e.what(), cfg_at);
    }

    struct Record {
        Shape shape;
        std::span<const std::uint8_t> payload;
        std::size_t offset;
    };
    std::map<std::string, Record> records;
    while (!r.done()) {
        const std::size_t at = r.offset();
        const auto name_len = r.u32("record name length");
        const auto name = r.take(name_len, "record name");
        const auto rank = r.u32("record rank");
        if (rank > 8) throw FormatError("checkpoint record rank " + std::to_string(rank) + " is implausible", at);
        Shape shape;
        std::size_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            shape.push_back(r.u32("record dims"));
            count *= shape.back();
        }
        if (count > (std::size_t{1} << 32)) throw FormatError("checkpoint record is implausibly large", at);
        const auto payload = r.take(count * sizeof(float), "record payload");
        std::string key(name.begin(), name.end());
        if (!records.emplace(key, Record{shape, payload, at}).second)
            throw FormatError("checkpoint repeats tensor '" + key + "'", at);
    }

    const std::size_t crc_at = bytes.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[crc_at + i]) << (8 * i);
    if (stored != crc32_of(bytes.first(crc_at))) throw FormatError("checkpoint CRC-32 mismatch", crc_at);

    Model model(cfg, 0);
    auto restore = [&](std::vector<NamedTensor>& tensors) {
        for (auto& t : tensors) {
            auto it = records.find(t.name);
            if (it == records.end()) throw FormatError("checkpoint lacks tensor '" + t.name + "'", crc_at);
            if (it->second.shape != t.value.shape())
                throw FormatError("checkpoint tensor '" + t.name + "' has shape " + shape_string(it->second.shape) +
                                  ", model expects " + shape_string(t.value.shape()), it->second.offset);
            std::memcpy(t.value.data().data(), it->second.payload.data(), it->second.payload.size());
            records.erase(it);
        }
    };
    restore(model.parameters());
    restore(model.buffers());
    if (!records.empty())
        throw FormatError("checkpoint has unexpected tensor '" + records.begin()->first + "'",
                          records.begin()->second.offset);
    return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write checkpoint '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("failed writing checkpoint '" + path.string() + "'");
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'", 0);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_checkpoint(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.detail(), e.offset());
    }
}

}  // namespace wavreg
