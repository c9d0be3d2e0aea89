#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ldsb {

enum class ErrorKind {
  InvalidInput,
  InvalidSpec,
  InvalidRank,
  ShapeError,
  DegenerateBasis,
  TooLarge,
  IoError,
  ParseError,
  Divergence,
  UndefinedRank,
  DegenerateLogits,
  DegenerateLabels,
  InsufficientData,
  DomainError,
  InternalInconsistency,
  NoCrossing,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidRank: return "InvalidRank";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::DegenerateBasis: return "DegenerateBasis";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::Divergence: return "DivergenceError";
    case ErrorKind::UndefinedRank: return "UndefinedRank";
    case ErrorKind::DegenerateLogits: return "DegenerateLogits";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::InternalInconsistency: return "InternalInconsistency";
    case ErrorKind::NoCrossing: return "NoCrossing";
  }
  return "Error";
}

}  // namespace ldsb
