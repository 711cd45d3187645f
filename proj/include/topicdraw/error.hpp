#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace topicdraw {

// Base of every error the library raises. The CLI maps the three branches
// below onto exit codes 1 (io/config) and 2 (domain).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class UnknownWord : public DomainError {
 public:
  explicit UnknownWord(std::string word, const std::string& what = "unknown word")
      : DomainError(what + ": " + word), word_(std::move(word)) {}

  const std::string& word() const noexcept { return word_; }

 private:
  std::string word_;
};

}  // namespace topicdraw
