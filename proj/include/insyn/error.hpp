#pragma once

#include <stdexcept>
#include <string>

namespace insyn {

// Error with a stable machine-readable kind ("empty-scene", "degenerate", ...)
// plus a human message. The CLI maps kinds onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

[[noreturn]] inline void fail(std::string kind, const std::string& message) {
  throw Error(std::move(kind), message);
}

}  // namespace insyn
