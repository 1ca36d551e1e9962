#pragma once

#include <stdexcept>
#include <string>

namespace sktag {

// Malformed input files, unknown tags, empty corpora, length violations.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid model configuration, corrupt model files, non-finite numerics.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sktag
