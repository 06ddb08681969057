#pragma once

#include <stdexcept>
#include <string>

namespace mpmrc {

// Precondition or invariant broken by the caller.
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// NaN/Inf surfaced during computation; message names the originating op.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data (JSONL, embedding files).
struct IngestError : std::runtime_error {
  explicit IngestError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint or file IO failure.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Prediction produced no candidate (all passages masked out).
struct NoAnswerError : std::runtime_error {
  explicit NoAnswerError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mpmrc
