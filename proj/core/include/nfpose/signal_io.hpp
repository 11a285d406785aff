#pragma once

#include <cstdint>
#include <string>

#include "nfpose/channel.hpp"

namespace nfpose {

// 32-byte little-endian header: magic "NFPSIG01", uint32 rows, uint32 slots,
// uint64 seed, uint64 reserved; then re/im doubles, column-major.
void write_signal(const std::string& path, const ReceivedSignal& signal, std::uint64_t seed);
ReceivedSignal read_signal(const std::string& path, std::uint64_t* seed = nullptr);

}  // namespace nfpose
