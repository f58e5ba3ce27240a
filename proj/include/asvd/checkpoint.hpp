#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "asvd/network.hpp"

namespace asvd {

/// Binary checkpoint layout (all integers and floats little-endian):
///
///   "ASVD"                 4 bytes magic
///   version                u32 (currently 1)
///   layer_count            u32
///   per layer:
///     rows                 u32
///     cols                 u32
///     activation           u8  (0 identity, 1 tanh, 2 relu)
///     weights              rows*cols f64, row-major
inline constexpr std::uint32_t kCheckpointVersion = 1;

class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

std::string encode_checkpoint(const Network& net);
Network decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace asvd
