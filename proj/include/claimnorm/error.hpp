#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace claimnorm {

// Every failure the library reports carries one of these codes. The CLI maps
// them onto exit codes through is_config_error().
enum class Errc {
  // corpus
  MissingColumn,
  EmptyPost,
  EncodingError,
  LanguageMismatch,
  MissingGold,
  TooManyInvalidRows,
  // generic
  EmptyInput,
  InvalidArgument,
  IoError,
  ConfigError,
  // embeddings
  ProviderUnreachable,
  DimensionMismatch,
  MissingVector,
  ZeroVector,
  NoModelForLanguage,
  // retrieval
  RowCountMismatch,
  NotNormalized,
  KTooLarge,
  // llm
  AuthError,
  RateLimited,
  MalformedResponse,
  Timeout,
  HttpError,
  ReplayMiss,
  // evaluation
  IdMismatch,
  UnknownFormat,
};

std::string_view to_string(Errc code);

// True for errors caused by configuration or usage rather than by data.
bool is_config_error(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }
  // The message without the code prefix that what() carries.
  const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string message_;
};

}  // namespace claimnorm
