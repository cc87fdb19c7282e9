#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace topoembed {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t value);

/// Hash of a file's bytes as 16 hex digits; throws ErrorKind::Io when unreadable.
std::string file_hash(const std::filesystem::path& path);

/// Derives an independent generator seed for a named substream.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);
Rng make_rng(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; exceptions propagate.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn);

} // namespace topoembed

#include "topoembed/detail/parallel.hpp"
