#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace blindspot {

enum class ErrorKind {
  parse,                // malformed input record or file
  out_of_bounds,        // box or pixel outside the scene
  invalid_argument,     // bad parameter or flag value
  provenance_mismatch,  // heatmap and log come from different scenes/detectors
  io,                   // read/write failure
  no_solution,          // planner could not connect start and end
  start_inadmissible,
  end_inadmissible,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return "ParseError";
    case ErrorKind::out_of_bounds: return "OutOfBounds";
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::provenance_mismatch: return "ProvenanceMismatch";
    case ErrorKind::io: return "IoError";
    case ErrorKind::no_solution: return "NoSolution";
    case ErrorKind::start_inadmissible: return "StartInadmissible";
    case ErrorKind::end_inadmissible: return "EndInadmissible";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace blindspot
