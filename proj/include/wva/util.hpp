// Copyright 2026 The WVA Simulator Authors.
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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wva {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Shortest text that parses back to the same double.
std::string format_double(double value);

/// Fixed precision, for human-facing tables.
std::string format_fixed(double value, int digits);

std::string format_optional(const std::optional<double>& value);

/// Splits one CSV line on commas. Quoting is not supported; none of the
/// schemas carry commas inside fields.
std::vector<std::string> split_csv(std::string_view line);

std::string_view trim(std::string_view text);

std::optional<double> parse_double(std::string_view text);
std::optional<std::int64_t> parse_int(std::string_view text);
std::optional<bool> parse_bool(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace wva
