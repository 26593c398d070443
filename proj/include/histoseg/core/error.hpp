#pragma once

#include <stdexcept>
#include <string>

namespace histoseg::core {

// Single exception type for the whole library; `kind` mirrors the error
// categories the operations document in their contracts.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    argument,  // bad caller-supplied value
    shape,     // tensor/grid dimension mismatch
    contract,  // precondition violated (e.g. unnormalized tokens)
    schema,    // malformed manifest/config/prompt document
    io,        // file read/write failure
    backend,   // encoder backend unavailable or misbehaving
  };

  Error(Kind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

[[noreturn]] inline void fail(Error::Kind kind, const std::string& msg) { throw Error(kind, msg); }

}  // namespace histoseg::core
