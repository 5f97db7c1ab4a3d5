#pragma once

namespace evflow::detail {

extern const char* const kPlannerTemplate;
extern const char* const kRefinementTemplate;
extern const char* const kArbitrationTemplate;
extern const char* const kSynthesisTemplate;
extern const char* const kOracleSystemTemplate;
extern const char* const kOracleUserTemplate;

}  // namespace evflow::detail
