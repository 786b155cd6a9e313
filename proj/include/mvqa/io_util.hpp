// Copyright 2026 The mvqa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mvqa {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

// Writes to a sibling temp file then renames over `path`. Parent directories
// are created. A crash never leaves a partially written `path` behind.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::span<const std::uint8_t> bytes);

// Shortest round-trip decimal representation ("%.17g" trimmed); stable across runs.
std::string format_double(double v);
// Fixed-precision rendering for reports.
std::string format_fixed(double v, int digits);

}  // namespace mvqa
