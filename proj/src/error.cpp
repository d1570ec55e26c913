#include "claimnorm/error.hpp"

namespace claimnorm {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::EmptyPost: return "EmptyPost";
    case Errc::EncodingError: return "EncodingError";
    case Errc::LanguageMismatch: return "LanguageMismatch";
    case Errc::MissingGold: return "MissingGold";
    case Errc::TooManyInvalidRows: return "TooManyInvalidRows";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoError: return "IoError";
    case Errc::ConfigError: return "ConfigError";
    case Errc::ProviderUnreachable: return "ProviderUnreachable";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::MissingVector: return "MissingVector";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::NoModelForLanguage: return "NoModelForLanguage";
    case Errc::RowCountMismatch: return "RowCountMismatch";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::AuthError: return "AuthError";
    case Errc::RateLimited: return "RateLimited";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::Timeout: return "Timeout";
    case Errc::HttpError: return "HttpError";
    case Errc::ReplayMiss: return "ReplayMiss";
    case Errc::IdMismatch: return "IdMismatch";
    case Errc::UnknownFormat: return "UnknownFormat";
  }
  return "Unknown";
}

bool is_config_error(Errc code) {
  switch (code) {
    case Errc::ConfigError:
    case Errc::InvalidArgument:
    case Errc::UnknownFormat:
    case Errc::NoModelForLanguage:
    case Errc::AuthError:
      return true;
    default:
      return false;
  }
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

}  // namespace claimnorm
