#pragma once

#include <stdexcept>
#include <string>

namespace ehnode {

/// Invalid or inconsistent scenario / model configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ehnode
