#pragma once

#include <stdexcept>
#include <string>

namespace gazespot {

// Error taxonomy mirrored by the CLI exit codes: usage = 1, data = 2,
// numerical = 3.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Pearson correlation requested on a constant raster.
struct CorrelationUndefined : NumericError {
  explicit CorrelationUndefined(const std::string& msg) : NumericError(msg) {}
};

// All attention mass inside the ROI; callers record these as censored-high.
struct DegenerateFdi : NumericError {
  explicit DegenerateFdi(const std::string& msg) : NumericError(msg) {}
};

}  // namespace gazespot
