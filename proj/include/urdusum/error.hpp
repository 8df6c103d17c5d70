#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace urdusum {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class IdOutOfRange : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NoUnmaskedPositions : public Error {
 public:
  NoUnmaskedPositions() : Error("attention over a source with no unmasked positions") {}
};

class NoScoredPositions : public Error {
 public:
  NoScoredPositions() : Error("no scored target positions") {}
};

class EmptyAfterPreprocessing : public Error {
 public:
  EmptyAfterPreprocessing() : Error("document is empty after preprocessing") {}
};

class TooFewDocuments : public Error {
 public:
  explicit TooFewDocuments(std::size_t n)
      : Error("corpus split needs at least 2 documents, got " + std::to_string(n)) {}
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(const std::string& id) : Error("duplicate document id '" + id + "'"), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the file name and 1-based line number (0 if
/// the error is not tied to a line).
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : Error(format(file, line, what)), file_(std::move(file)), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& file, std::size_t line, const std::string& what) {
    std::string out = file.empty() ? std::string("<input>") : file;
    if (line > 0) out += ":" + std::to_string(line);
    return out + ": " + what;
  }

  std::string file_;
  std::size_t line_;
};

/// Loss became NaN or infinite. Epoch and batch are 1-based; 0 means "not
/// inside a training loop".
class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(std::size_t epoch = 0, std::size_t batch = 0)
      : Error(format(epoch, batch)), epoch_(epoch), batch_(batch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  static std::string format(std::size_t epoch, std::size_t batch) {
    std::string out = "non-finite loss";
    if (epoch > 0) out += " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch);
    return out;
  }

  std::size_t epoch_;
  std::size_t batch_;
};

}  // namespace urdusum
