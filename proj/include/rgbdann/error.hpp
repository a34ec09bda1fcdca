#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rgbdann {

enum class Errc {
  missing_file,
  dimension_mismatch,
  bad_metadata,
  io_failure,
  schema_version_mismatch,
  invariant_violation,
  degenerate,
  empty_input,
  no_foreground,
  no_floor,
  too_few_points,
  node_set_mismatch,
  missing_spec,
  insufficient_samples,
  unknown_category,
  unknown_label,
  incomplete_assignment,
  no_op,
  placement_failure,
  invalid_action,
  unknown_node,
  label_not_in_suggestions,
  no_completed_sessions,
  not_found,
};

std::string_view to_string(Errc code);

// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::missing_file: return "MissingFile";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::bad_metadata: return "BadMetadata";
    case Errc::io_failure: return "IoFailure";
    case Errc::schema_version_mismatch: return "SchemaVersionMismatch";
    case Errc::invariant_violation: return "InvariantViolation";
    case Errc::degenerate: return "Degenerate";
    case Errc::empty_input: return "EmptyInput";
    case Errc::no_foreground: return "NoForeground";
    case Errc::no_floor: return "NoFloor";
    case Errc::too_few_points: return "TooFewPoints";
    case Errc::node_set_mismatch: return "NodeSetMismatch";
    case Errc::missing_spec: return "MissingSpec";
    case Errc::insufficient_samples: return "InsufficientSamples";
    case Errc::unknown_category: return "UnknownCategory";
    case Errc::unknown_label: return "UnknownLabel";
    case Errc::incomplete_assignment: return "IncompleteAssignment";
    case Errc::no_op: return "NoOpError";
    case Errc::placement_failure: return "PlacementFailure";
    case Errc::invalid_action: return "InvalidAction";
    case Errc::unknown_node: return "UnknownNode";
    case Errc::label_not_in_suggestions: return "LabelNotInSuggestions";
    case Errc::no_completed_sessions: return "NoCompletedSessions";
    case Errc::not_found: return "NotFound";
  }
  return "Unknown";
}

}  // namespace rgbdann
