#pragma once

#include <stdexcept>
#include <string>

namespace scatgen {

/// Base class for all library errors.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on user-supplied parameters was violated.
class invalid_parameter_error : public error {
 public:
  using error::error;
};

/// Tensor/image shapes do not agree.
class dimension_mismatch_error : public error {
 public:
  using error::error;
};

/// Scattering layouts (J, Q, grid, channels) do not agree.
class layout_mismatch_error : public error {
 public:
  using error::error;
};

class insufficient_samples_error : public error {
 public:
  using error::error;
};

class io_error : public error {
 public:
  using error::error;
};

class unsupported_format_error : public error {
 public:
  using error::error;
};

class version_mismatch_error : public error {
 public:
  using error::error;
};

class checksum_mismatch_error : public error {
 public:
  using error::error;
};

/// A gradient or loss stopped being finite; message carries context.
class nonfinite_error : public error {
 public:
  using error::error;
};

/// Artifacts (checkpoint/whitening/dataset) disagree on a dimension.
class incompatibility_error : public error {
 public:
  using error::error;
};

class empty_split_error : public error {
 public:
  using error::error;
};

}  // namespace scatgen
