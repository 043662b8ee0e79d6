#pragma once

#include <stdexcept>
#include <string>

namespace spamzero {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// corpus_ingest
struct MissingRoot : Error { using Error::Error; };
struct NoCategories : Error { using Error::Error; };
struct UnknownCategory : Error { using Error::Error; };

// prompt rendering
struct UnsanitizedContent : Error { using Error::Error; };

// backends
struct AuthError : Error { using Error::Error; };
struct ExhaustedRetries : Error { using Error::Error; };
struct MalformedResponse : Error { using Error::Error; };

// metrics
struct EmptyMatrix : Error { using Error::Error; };
struct OneClassAbsent : Error { using Error::Error; };
struct NoPositives : Error { using Error::Error; };
struct MissingGold : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };

// cli
struct UnknownRun : Error { using Error::Error; };

}  // namespace spamzero
