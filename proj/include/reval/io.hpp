// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace reval::io {

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view content);

void append_line(const std::filesystem::path& path, std::string_view line);

/// Splits on '\n', dropping blank lines.
std::vector<std::string> split_lines(std::string_view content);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

std::string sha256_hex(std::string_view data);

/// Maps an opaque id onto one safe path component.
std::string sanitize_component(std::string_view id);

}  // namespace reval::io
