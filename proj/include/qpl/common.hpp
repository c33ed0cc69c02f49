#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace qpl {

// Error codes shared across the pipeline. Static errors (syntax, typing)
// and runtime errors (capacity, timeout) use the same exception type so the
// CLI can map them to exit codes uniformly.
enum class Errc {
  syntax_error,
  desugar_error,
  ill_typed_value,
  unbound_variable,
  type_mismatch,
  not_classical,
  arity_mismatch,
  branch_mismatch,
  unknown_procedure,
  duplicate_variable,
  duplicate_procedure,
  ill_formed_config,
  unknown_gate,
  capacity_exceeded,
  index_out_of_range,
  duplicate_target,
  stuck_configuration,
  timeout,
  truncation_overflow,
  internal_error,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::syntax_error: return "SyntaxError";
    case Errc::desugar_error: return "DesugarError";
    case Errc::ill_typed_value: return "IllTypedValue";
    case Errc::unbound_variable: return "UnboundVariable";
    case Errc::type_mismatch: return "TypeMismatch";
    case Errc::not_classical: return "NotClassical";
    case Errc::arity_mismatch: return "ArityMismatch";
    case Errc::branch_mismatch: return "BranchMismatch";
    case Errc::unknown_procedure: return "UnknownProcedure";
    case Errc::duplicate_variable: return "DuplicateVariable";
    case Errc::duplicate_procedure: return "DuplicateProcedure";
    case Errc::ill_formed_config: return "IllFormedConfig";
    case Errc::unknown_gate: return "UnknownGate";
    case Errc::capacity_exceeded: return "CapacityExceeded";
    case Errc::index_out_of_range: return "IndexOutOfRange";
    case Errc::duplicate_target: return "DuplicateTarget";
    case Errc::stuck_configuration: return "StuckConfiguration";
    case Errc::timeout: return "Timeout";
    case Errc::truncation_overflow: return "TruncationOverflow";
    case Errc::internal_error: return "InternalError";
  }
  return "Error";
}

struct SourcePos {
  int line = 0;
  int column = 0;
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message, std::optional<SourcePos> pos = {})
      : std::runtime_error(format(code, message, pos)),
        code_(code),
        pos_(pos) {}

  Errc code() const { return code_; }
  std::optional<SourcePos> pos() const { return pos_; }

 private:
  static std::string format(Errc code, const std::string& message,
                            std::optional<SourcePos> pos) {
    std::string s = errc_name(code);
    if (pos) {
      s += " at " + std::to_string(pos->line) + ":" +
           std::to_string(pos->column);
    }
    s += ": ";
    s += message;
    return s;
  }

  Errc code_;
  std::optional<SourcePos> pos_;
};

[[noreturn]] inline void fail(Errc code, std::string message) {
  throw Error(code, std::move(message));
}

[[noreturn]] inline void fail_at(Errc code, SourcePos pos,
                                 std::string message) {
  throw Error(code, std::move(message), pos);
}

}  // namespace qpl
