#include "dingdate/error.hpp"

namespace dingdate {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::Cycle: return "CycleError";
    case Errc::Orphan: return "OrphanError";
    case Errc::MultipleDynastyParents: return "OrphanError(multiple dynasty parents)";
    case Errc::DuplicateNode: return "DuplicateNode";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::InvalidEdge: return "InvalidEdge";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::TooLarge: return "TooLarge";
    case Errc::IllegalAssignment: return "IllegalAssignment";
    case Errc::NodeNotInView: return "NodeNotInView";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NotScalar: return "NotScalar";
    case Errc::BadConfig: return "BadConfig";
    case Errc::ConfigError: return "ConfigError";
    case Errc::ParseError: return "ParseError";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::EmptySplit: return "EmptySplit";
    case Errc::Io: return "IoError";
  }
  return "Error";
}

}  // namespace dingdate
