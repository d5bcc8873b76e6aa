#pragma once

#include <stdexcept>
#include <string>

namespace smtpguard {

class ProtocolError : public std::runtime_error {
public:
  enum class Kind {
    MalformedAddress,
    MalformedCommand,
    LineTooLong,
    MalformedReply,
    InvalidBase64,
  };

  ProtocolError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

// Raised when a value violates a domain invariant at construction time.
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class SpoolIoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class BindError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace smtpguard
