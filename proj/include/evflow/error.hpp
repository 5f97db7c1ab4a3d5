#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evflow {

enum class Errc {
  invalid_argument,
  invalid_config,
  conflict,
  transport,
  protocol,
  model_error,
  dimension_mismatch,
  zero_vector,
  empty_directory,
  decode_error,
  plan_parse,
  empty_plan,
  refinement_budget_exhausted,
  invalid_kernel,
  all_candidates_exhausted,
  arbitration_parse,
  io,
  schema,
};

const char* to_string(Errc code) noexcept;

/// Base of every error the engine throws. `code()` identifies the failure
/// class; the message is human readable.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Invalid(key, reason) and Conflict from config validation.
class ConfigError : public Error {
 public:
  ConfigError(Errc code, std::string key, std::string reason)
      : Error(code, key + ": " + reason), key_(std::move(key)), reason_(std::move(reason)) {}
  const std::string& key() const noexcept { return key_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string key_;
  std::string reason_;
};

/// A backend answered with HTTP status >= 400.
class ModelError : public Error {
 public:
  ModelError(int status, std::string body)
      : Error(Errc::model_error, "model endpoint returned HTTP " + std::to_string(status) + ": " + body),
        status_(status),
        body_(std::move(body)) {}
  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error(Errc::dimension_mismatch,
              "embedding dimension mismatch: expected " + std::to_string(expected) + ", got " +
                  std::to_string(got)),
        expected_(expected),
        got_(got) {}
  std::size_t expected() const noexcept { return expected_; }
  std::size_t got() const noexcept { return got_; }

 private:
  std::size_t expected_;
  std::size_t got_;
};

/// Model output that could not be turned into the expected structure.
class ParseError : public Error {
 public:
  ParseError(Errc code, const std::string& what, std::string raw)
      : Error(code, what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

}  // namespace evflow
