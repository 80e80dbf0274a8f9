#pragma once

#include <stdexcept>
#include <string>

namespace zpd {

// All module errors are thrown as zpd::Error. The CLI layer attaches the
// pipeline stage name before surfacing them as machine-readable objects.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
  Error(const std::string& stage, const std::string& msg)
      : std::runtime_error(stage + ": " + msg), stage_(stage) {}

  const std::string& stage() const { return stage_; }

private:
  std::string stage_;
};

}  // namespace zpd
