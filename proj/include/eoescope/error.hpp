#pragma once

#include <stdexcept>
#include <string>

namespace eoescope {

/// Error raised by every module. `module()` names the subsystem that failed and
/// `code()` is a short machine-readable tag such as "duplicate-id".
class Error : public std::runtime_error {
 public:
  Error(std::string module, std::string code, const std::string& message)
      : std::runtime_error(message), module_(std::move(module)), code_(std::move(code)) {}

  const std::string& module() const noexcept { return module_; }
  const std::string& code() const noexcept { return code_; }

 private:
  std::string module_;
  std::string code_;
};

}  // namespace eoescope
