#pragma once

#include <stdexcept>
#include <string>

namespace occ {

// Shared error taxonomy. Each type is one failure class callers are expected
// to handle distinctly; the HTTP layer maps them onto status codes.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value produced by a numeric kernel. layer_index is the offset of
// the offending layer in the LayerSpec chain, or -1 when not layer-bound.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what, int layer = -1)
      : std::runtime_error(what), layer_index(layer) {}
  int layer_index;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AuthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ForbiddenError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RequestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace occ
