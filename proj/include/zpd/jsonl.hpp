#pragma once

#include <json.hpp>

#include <fstream>
#include <functional>
#include <string>

#include "zpd/error.hpp"

namespace zpd {

// Visits each non-blank line of a newline-delimited JSON file. Parse failures
// carry the 1-based line number.
inline void for_each_jsonl(const std::string& path,
                           const std::function<void(const nlohmann::json&, size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(path + ":" + std::to_string(lineno) + ": parse error: " + e.what());
    }
    fn(j, lineno);
  }
}

}  // namespace zpd
