#pragma once

#include <stdexcept>
#include <string>

namespace vsflab {

// All recoverable failures surface as Error; the CLI turns them into a
// one-line diagnostic and a nonzero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

}  // namespace vsflab
