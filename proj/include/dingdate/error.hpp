#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dingdate {

enum class Errc {
  // graph
  Cycle,
  Orphan,
  MultipleDynastyParents,
  DuplicateNode,
  UnknownNode,
  InvalidEdge,
  LengthMismatch,
  TooLarge,
  // inference
  IllegalAssignment,
  NodeNotInView,
  // losses / tensor
  EmptyBatch,
  ShapeMismatch,
  NotScalar,
  // model / train / data
  BadConfig,
  ConfigError,
  ParseError,
  SchemaViolation,
  EmptyDataset,
  EmptySplit,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

/// Single exception type for the library; `code()` names the failure class.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dingdate
