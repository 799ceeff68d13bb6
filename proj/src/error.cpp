#include "hetfraud/error.hpp"

namespace hetfraud {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::schema: return "schema";
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::io: return "io";
    case ErrorKind::build: return "build";
    case ErrorKind::query: return "query";
    case ErrorKind::integrity: return "integrity";
    case ErrorKind::shape: return "shape";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::usage: return "usage";
    case ErrorKind::check: return "check";
    case ErrorKind::resample: return "resample";
    case ErrorKind::weight: return "weight";
    case ErrorKind::metric: return "metric";
    case ErrorKind::split: return "split";
    case ErrorKind::training: return "training";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse:
    case ErrorKind::schema:
    case ErrorKind::data:
    case ErrorKind::io:
      return 2;
    case ErrorKind::config:
    case ErrorKind::shape:
      return 3;
    default:
      return 1;
  }
}

}  // namespace hetfraud
