#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace finsage {

enum class ErrorCode {
  kArgument,
  kParse,
  kSchema,
  kNotFound,
  kFormat,
  kIo,
  kClient,
  kDomain,
  kConfig,
  kEmptyStore,
  kInput,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Malformed JSON input; offset is the byte position reported by the parser.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(ErrorCode::kParse, message), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ClientError : public Error {
 public:
  explicit ClientError(const std::string& message, bool retryable = true)
      : Error(ErrorCode::kClient, message), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class DimensionError : public Error {
 public:
  DimensionError(std::size_t expected, std::size_t actual)
      : Error(ErrorCode::kArgument, "embedding dimension mismatch: expected " +
                                        std::to_string(expected) + ", got " +
                                        std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

// Raised when a table/image block could not be turned into text.
class TextualizeError : public ClientError {
 public:
  TextualizeError(const std::string& message, std::string img_path)
      : ClientError(message, true), img_path_(std::move(img_path)) {}

  const std::string& img_path() const noexcept { return img_path_; }

 private:
  std::string img_path_;
};

}  // namespace finsage
