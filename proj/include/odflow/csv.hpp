/*
 * Copyright 2026 The odflow Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace odflow::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based source line of each row (header is line 1).
  std::vector<std::size_t> lines;
};

/// RFC 4180-style parsing: quoted fields, doubled quotes, CRLF, leading BOM.
Table parse(std::string_view text);
Table read(const std::filesystem::path& path);

std::optional<double> parse_double(std::string_view cell);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

std::string escape(std::string_view field);

void write_file(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace odflow::csv
