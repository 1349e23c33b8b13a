#pragma once

#include <stdexcept>

namespace hmmn {

// Shape or emptiness violations in the linear-algebra layer.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised while turning raw tokens/features into vectors (empty sentence,
// empty region list, vocabulary problems). Message names the offending field.
struct EncodingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or version-mismatched files (dataset JSON, checkpoints, vocab TSV).
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid generator or trainer configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Training-time failures (divergence, NaN loss).
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hmmn
