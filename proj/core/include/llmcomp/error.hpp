#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace llmcomp {

// Failure categories. The CLI maps each one to a distinct exit code.
enum class ErrorKind {
  usage,            // invalid parameters or parameter combinations
  io,               // file system failures
  malformed_input,  // input bytes do not describe a valid object
  corruption,       // checksum, hash or stream-accounting failures
  bound_violation,  // a reconstructed point exceeds the error bound
  divergence,       // training produced a non-finite loss
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace llmcomp
