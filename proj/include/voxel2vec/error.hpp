#pragma once

#include <stdexcept>
#include <string>

namespace voxel2vec {

// Base of every error thrown by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller passed an argument outside an operation's domain.
class parameter_error : public error {
 public:
  using error::error;
};

// A dataset descriptor is malformed or inconsistent with the files it names.
class descriptor_error : public error {
 public:
  using error::error;
};

class io_error : public error {
 public:
  using error::error;
};

// An internal consistency check failed.
class invariant_error : public error {
 public:
  using error::error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw parameter_error(message);
}

}  // namespace detail
}  // namespace voxel2vec
