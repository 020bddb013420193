#pragma once

#include <stdexcept>
#include <string>

namespace cutie {

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Codec byte outside [0, 242].
struct InvalidCodeword : Error {
  using Error::Error;
};

// Thermometer input outside the encodable range.
struct EncodingRange : Error {
  using Error::Error;
};

// Tensor / feature-map dimensions do not line up.
struct ShapeError : Error {
  using Error::Error;
};

// Malformed or truncated container file.
struct FormatError : Error {
  using Error::Error;
};

// Request exceeds a hardware memory or FIFO capacity.
struct CapacityError : Error {
  using Error::Error;
};

// Network graph cannot be lowered onto the architecture.
struct UnsupportedGraph : Error {
  using Error::Error;
};

// Compiled program needs more layer-queue slots than the arch provides.
struct QueueOverflow : Error {
  using Error::Error;
};

// Batch-norm channel with gamma == 0; output would be constant.
struct DegenerateChannel : Error {
  using Error::Error;
};

// Operation count requested for a layer kind that is not counted.
struct NotCounted : Error {
  using Error::Error;
};

// Statistic undefined for the given input (empty tensor, single pixel).
struct UndefinedStat : Error {
  using Error::Error;
};

// Activity analysis invoked on a trace with no executed cycles.
struct EmptyTrace : Error {
  using Error::Error;
};

}  // namespace cutie
