#include "evflow/error.hpp"

namespace evflow {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::invalid_config: return "Invalid";
    case Errc::conflict: return "Conflict";
    case Errc::transport: return "Transport";
    case Errc::protocol: return "Protocol";
    case Errc::model_error: return "ModelError";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::zero_vector: return "ZeroVector";
    case Errc::empty_directory: return "EmptyDirectory";
    case Errc::decode_error: return "DecodeError";
    case Errc::plan_parse: return "PlanParseError";
    case Errc::empty_plan: return "EmptyPlan";
    case Errc::refinement_budget_exhausted: return "RefinementBudgetExhausted";
    case Errc::invalid_kernel: return "InvalidKernel";
    case Errc::all_candidates_exhausted: return "AllCandidatesExhausted";
    case Errc::arbitration_parse: return "ArbitrationParseError";
    case Errc::io: return "IO";
    case Errc::schema: return "Schema";
  }
  return "Unknown";
}

}  // namespace evflow
