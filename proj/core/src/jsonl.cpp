// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include "unistage/jsonl.hpp"

#include <system_error>

namespace unistage::detail {

void for_each_data_line(const std::filesystem::path& path,
                        const std::function<void(std::size_t, std::string_view)>& on_line) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.starts_with("#schema=")) {
      if (line != kSchemaHeader) {
        throw ValidationError(path.string() + ": unsupported schema header '" + line + "'");
      }
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    on_line(line_no, line);
  }
}

std::string dump_line(const nlohmann::json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

void atomic_write(const std::filesystem::path& path, std::string_view body) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (out) out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place: " + path.string());
  }
}

std::size_t allowed_errors(std::size_t data_lines, double budget) {
  if (budget <= 0.0 || data_lines == 0) return 0;
  return static_cast<std::size_t>(std::ceil(budget * static_cast<double>(data_lines)));
}

}  // namespace unistage::detail
