// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace apisync {

// Insertion-ordered so emitted records keep their documented field order.
using Json = nlohmann::ordered_json;

}  // namespace apisync

namespace apisync::io {

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames it into place, so readers
/// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

/// One compact JSON document per line, each terminated by "\n".
std::string to_jsonl(const std::vector<Json>& rows);
std::vector<Json> parse_jsonl(std::string_view text);
std::vector<Json> read_jsonl(const std::filesystem::path& path);

std::size_t count_lines(std::string_view text) noexcept;

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace apisync::io
