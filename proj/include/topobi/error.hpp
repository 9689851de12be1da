#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace topobi {

enum class ErrorKind {
  Config,
  NotInVocabulary,
  DuplicateTerminal,
  BadPinSet,
  Parse,
  Capacity,
  SequenceOverflow,
  InvalidGraph,
  GrammarViolation,
  NoSupplyPath,
  TranslationFail,
  Session,
  Protocol,
  Io,
};

inline const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::NotInVocabulary: return "NotInVocabulary";
    case ErrorKind::DuplicateTerminal: return "DuplicateTerminal";
    case ErrorKind::BadPinSet: return "BadPinSet";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::Capacity: return "CapacityError";
    case ErrorKind::SequenceOverflow: return "SequenceOverflow";
    case ErrorKind::InvalidGraph: return "InvalidGraph";
    case ErrorKind::GrammarViolation: return "GrammarViolation";
    case ErrorKind::NoSupplyPath: return "NoSupplyPath";
    case ErrorKind::TranslationFail: return "TranslationFail";
    case ErrorKind::Session: return "SessionError";
    case ErrorKind::Protocol: return "ProtocolError";
    case ErrorKind::Io: return "IoError";
  }
  return "Error";
}

// Every failure raised by the toolkit. `position` is a token index for
// sequence errors and a 1-based line number for netlist errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> position = std::nullopt)
      : std::runtime_error(format(kind, message, position)),
        kind_(kind),
        message_(message),
        position_(position) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& message() const noexcept { return message_; }
  std::optional<std::size_t> position() const noexcept { return position_; }

 private:
  static std::string format(ErrorKind kind, const std::string& message,
                            std::optional<std::size_t> position) {
    std::string out = error_kind_name(kind);
    if (position) out += " at " + std::to_string(*position);
    out += ": ";
    out += message;
    return out;
  }

  ErrorKind kind_;
  std::string message_;
  std::optional<std::size_t> position_;
};

}  // namespace topobi
