// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// Line-delimited JSON record files with a versioned schema header.

#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "unistage/digest.hpp"
#include "unistage/error.hpp"

namespace unistage {

inline constexpr std::string_view kSchemaHeader = "#schema=unistage/v1";

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct ReadOptions {
  // Fraction of data lines allowed to be malformed. The allowance is rounded
  // up, so any non-empty file tolerates at least one bad line.
  double error_budget = 0.001;
};

template <typename T>
struct ReadResult {
  std::vector<T> records;
  std::vector<LineError> errors;
};

// What a writer reports back for the run manifest.
struct WriteFragment {
  std::string path;
  std::size_t count = 0;
  std::string digest;  // SHA-256 of the file bytes
};

namespace detail {

// Calls `on_line(line_no, text)` for each data line. Handles the header and
// blank lines. Throws IoError if the file cannot be opened.
void for_each_data_line(const std::filesystem::path& path,
                        const std::function<void(std::size_t, std::string_view)>& on_line);

// Serialized form used for every record line: sorted keys, UTF-8, no spaces.
std::string dump_line(const nlohmann::json& j);

// Writes `body` to `path` through a temporary sibling so a failed write
// never leaves a partial file behind.
void atomic_write(const std::filesystem::path& path, std::string_view body);

std::size_t allowed_errors(std::size_t data_lines, double budget);

}  // namespace detail

template <typename T>
ReadResult<T> read_records(const std::filesystem::path& path, const ReadOptions& opts = {}) {
  ReadResult<T> out;
  std::size_t data_lines = 0;
  detail::for_each_data_line(path, [&](std::size_t line_no, std::string_view text) {
    ++data_lines;
    try {
      auto j = nlohmann::json::parse(text);
      out.records.push_back(j.get<T>());
    } catch (const nlohmann::json::exception& e) {
      out.errors.push_back({line_no, e.what()});
    } catch (const ValidationError& e) {
      out.errors.push_back({line_no, e.what()});
    }
  });
  if (out.errors.size() > detail::allowed_errors(data_lines, opts.error_budget)) {
    const auto& first = out.errors.front();
    throw ValidationError(path.string() + ": " + std::to_string(out.errors.size()) +
                          " malformed lines exceed the error budget (first at line " +
                          std::to_string(first.line) + ": " + first.message + ")");
  }
  return out;
}

// Reads a file and throws on the first malformed line.
template <typename T>
std::vector<T> read_records_strict(const std::filesystem::path& path) {
  auto res = read_records<T>(path, ReadOptions{0.0});
  if (!res.errors.empty()) {
    throw ValidationError(path.string() + ":" + std::to_string(res.errors.front().line) + ": " +
                          res.errors.front().message);
  }
  return std::move(res.records);
}

template <typename T>
std::string serialize_records(const std::vector<T>& records) {
  std::string body;
  body.append(kSchemaHeader);
  body.push_back('\n');
  for (const auto& r : records) {
    nlohmann::json j = r;
    body += detail::dump_line(j);
    body.push_back('\n');
  }
  return body;
}

template <typename T>
WriteFragment write_records(const std::vector<T>& records, const std::filesystem::path& path) {
  const std::string body = serialize_records(records);
  detail::atomic_write(path, body);
  return WriteFragment{path.string(), records.size(), sha256_hex(body)};
}

}  // namespace unistage
