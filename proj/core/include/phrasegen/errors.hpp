#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace phrasegen {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Token sequence or note list violates the phrase/bar/song grammar.
class GrammarError : public Error {
 public:
  GrammarError(const std::string& what, std::ptrdiff_t token_index = -1)
      : Error(token_index >= 0 ? what + " (token " + std::to_string(token_index) + ")" : what),
        token_index_(token_index) {}

  /// Index of the offending token, or -1 when the error is not positional.
  std::ptrdiff_t token_index() const noexcept { return token_index_; }

 private:
  std::ptrdiff_t token_index_;
};

class MidiParseError : public Error {
 public:
  using Error::Error;
};

class UnsupportedMeterError : public Error {
 public:
  using Error::Error;
};

class SongTooLongError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class EmptySongError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergedError : public Error {
 public:
  using Error::Error;
};

class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

}  // namespace phrasegen
