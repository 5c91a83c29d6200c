#pragma once

#include <stdexcept>
#include <string>

namespace argue {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A judge could not produce a verdict (transport failure, retries exhausted,
/// missing human verdict, misconfiguration).
class JudgeError : public Error {
 public:
  JudgeError(const std::string& message, std::string fingerprint = {})
      : Error(message), fingerprint_(std::move(fingerprint)) {}

  const std::string& fingerprint() const noexcept { return fingerprint_; }

 private:
  std::string fingerprint_;
};

/// A judgment needed for scoring is absent from the judgment log.
class IncompleteLogError : public Error {
 public:
  using Error::Error;
};

/// Score sources disagree on their run or topic keys.
class MisalignmentError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace argue
