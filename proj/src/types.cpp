#include "pns/types.hpp"

#include <algorithm>
#include <cmath>

namespace pns {

void PnsConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid config: " + what); };
  if (!(lambda_r >= 0.0) || !std::isfinite(lambda_r)) fail("lambda_r must be >= 0");
  if (!(lambda_c >= 0.0) || !std::isfinite(lambda_c)) fail("lambda_c must be >= 0");
  if (!std::isfinite(s_min) || !std::isfinite(s_max) || !(s_min < s_max)) {
    fail("s_min must be < s_max");
  }
  if (buckets.empty()) fail("buckets must be non-empty");
  if (!std::is_sorted(buckets.begin(), buckets.end())) fail("buckets must be ascending");
  if (std::adjacent_find(buckets.begin(), buckets.end()) != buckets.end()) {
    fail("buckets must be distinct");
  }
  if (buckets.front() != s_min || buckets.back() != s_max) {
    fail("buckets must start at s_min and end at s_max");
  }
  if (group_size < 2) fail("group_size must be >= 2");
  if (!(answer_rel_tol > 0.0)) fail("answer_rel_tol must be > 0");
  if (!(advantage_epsilon > 0.0)) fail("advantage_epsilon must be > 0");
}

std::string to_string(ResponseSource source) {
  switch (source) {
    case ResponseSource::TargetModel: return "target-model";
    case ResponseSource::PnsModel: return "pns-model";
    case ResponseSource::RejectionSampling: return "rejection-sampling";
  }
  return "unknown";
}

std::optional<ResponseSource> parse_source(const std::string& label) {
  if (label == "target-model") return ResponseSource::TargetModel;
  if (label == "pns-model") return ResponseSource::PnsModel;
  if (label == "rejection-sampling") return ResponseSource::RejectionSampling;
  return std::nullopt;
}

}  // namespace pns
