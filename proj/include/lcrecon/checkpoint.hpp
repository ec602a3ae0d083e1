#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lcrecon/sampler.hpp"

namespace lcrecon {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary chain container, layout documented in docs/checkpoint_format.md.
std::string encode_chain(const ChainOutput& chain);
ChainOutput decode_chain(const std::string& bytes);

// Written to a temporary sibling and renamed into place.
void write_chain(const ChainOutput& chain, const std::filesystem::path& path);
ChainOutput read_chain(const std::filesystem::path& path);

// Replace `path` atomically with `contents`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace lcrecon
