#pragma once

#include <stdexcept>

namespace osr {

// Precondition/configuration violation. The CLI maps these to exit code 1.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Checkpoint file carries an unknown format tag or version.
struct CheckpointVersionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint file is truncated or structurally corrupt.
struct CheckpointIntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// CSV ingestion failure; message carries line/column context.
struct CsvParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace osr
