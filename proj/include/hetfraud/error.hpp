#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hetfraud {

enum class ErrorKind {
  parse,      // malformed input file
  schema,     // missing or unknown columns
  config,     // invalid configuration value
  data,       // invalid data value (e.g. negative timestamp)
  io,         // unreadable / unwritable path
  build,      // graph construction failure
  query,      // graph query type mismatch
  integrity,  // graph invariant violation
  shape,      // matrix shape mismatch
  numeric,    // non-finite value produced
  usage,      // API misuse (e.g. second backward)
  check,      // gradient check could not run
  resample,   // imbalance treatment infeasible
  weight,     // class weights undefined
  metric,     // metric undefined on input
  split,      // infeasible stratified split
  training,   // training diverged or was misconfigured
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit code for an error kind: 2 for bad inputs, 3 for config or
// shape problems, 1 for everything else.
int exit_code(ErrorKind kind);

}  // namespace hetfraud
