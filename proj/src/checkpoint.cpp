#include "asvd/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace asvd {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

class Reader {
public:
    Reader(const std::string& bytes, std::size_t offset) : bytes_(bytes), pos_(offset) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
        return std::bit_cast<double>(v);
    }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw FormatError("checkpoint: truncated data");
    }
    const std::string& bytes_;
    std::size_t pos_;
};

}  // namespace

std::string encode_checkpoint(const Network& net) {
    std::string out = "ASVD";
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(net.layer_count()));
    for (const Layer& l : net.layers()) {
        put_u32(out, static_cast<std::uint32_t>(l.weight.rows()));
        put_u32(out, static_cast<std::uint32_t>(l.weight.cols()));
        out.push_back(static_cast<char>(l.activation));
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put_f64(out, l.weight(r, c));
    }
    return out;
}

Network decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, "ASVD") != 0) throw FormatError("checkpoint: bad magic");
    Reader in(bytes, 4);
    const std::uint32_t version = in.u32();
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const std::uint32_t count = in.u32();
    if (count == 0) throw FormatError("checkpoint: zero layers");
    std::vector<Layer> layers;
    for (std::uint32_t l = 0; l < count; ++l) {
        const std::uint32_t rows = in.u32();
        const std::uint32_t cols = in.u32();
        const std::uint8_t tag = in.u8();
        if (tag > 2) throw FormatError("checkpoint: unknown activation tag " + std::to_string(tag));
        if (rows == 0 || cols == 0) throw FormatError("checkpoint: empty layer");
        Matrix w(rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r)
            for (std::uint32_t c = 0; c < cols; ++c) w(r, c) = in.f64();
        layers.push_back({std::move(w), static_cast<Activation>(tag)});
    }
    if (!in.at_end()) throw FormatError("checkpoint: trailing bytes");
    try {
        return Network(std::move(layers));
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const std::string bytes = encode_checkpoint(net);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace asvd
