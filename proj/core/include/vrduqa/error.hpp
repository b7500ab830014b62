#pragma once

#include <stdexcept>
#include <string>

namespace vrduqa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bounding box outside its page, or an invalid box.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration; maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed input file (document JSON, images, import files).
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked on an artifact that is not in the required state,
/// e.g. asking for OCR text of a page that was never augmented.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Transport failure after retries. Carries the request hash so the failing
/// call can be found in the cache directory and logs.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, std::string request_hash, int status = 0)
      : Error(what + " [request " + request_hash.substr(0, 16) + "]"),
        request_hash_(std::move(request_hash)),
        status_(status) {}

  const std::string& request_hash() const noexcept { return request_hash_; }
  int status() const noexcept { return status_; }

 private:
  std::string request_hash_;
  int status_;
};

/// HTTP 4xx from a provider: the request itself is wrong, retrying won't help.
class ProviderConfigError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

/// Judge output that could not be parsed into a verdict.
class MalformedVerdict : public Error {
 public:
  using Error::Error;
};

/// A question lacks enough entities with substitutes for the requested complexity.
class NotEnoughCandidates : public Error {
 public:
  using Error::Error;
};

/// A prior pipeline stage has not produced the artifacts this stage needs.
class MissingArtifact : public Error {
 public:
  using Error::Error;
};

}  // namespace vrduqa
