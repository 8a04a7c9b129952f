#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "abidnn/network.hpp"

namespace abidnn {

struct Checkpoint {
  Network network;
  std::uint64_t seed = 0;
};

/// Text container, see docs/checkpoint-format.md. Doubles are written in
/// shortest round-trip form, so a save/load cycle is bit-exact.
std::string format_checkpoint(const Network& net, std::uint64_t seed = 0);
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const Network& net, const std::filesystem::path& path, std::uint64_t seed = 0);
Network load_checkpoint(const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);
double parse_double(std::string_view s, std::string_view field);

}  // namespace abidnn
