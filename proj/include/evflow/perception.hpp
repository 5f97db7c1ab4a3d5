#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evflow/config.hpp"
#include "evflow/gateway.hpp"
#include "evflow/trace.hpp"
#include "evflow/types.hpp"

namespace evflow {

/// Inclusive span of positions in the sampled sequence.
struct TemporalWindow {
  std::size_t start = 0;
  std::size_t end = 0;
  double score = 0.0;     // mean smoothed score inside the window
  std::size_t peak = 0;   // raw-score argmax inside the window

  std::size_t length() const noexcept { return end - start + 1; }
  bool overlaps(const TemporalWindow& o) const noexcept { return start <= o.end && o.start <= end; }
};

enum class PatchKind { global, grid_cell };

struct PatchRef {
  PatchKind kind = PatchKind::global;
  int row = 0;
  int col = 0;
  Rect rect;
  double score = 0.0;

  std::string label() const;  // "global" or "cell(r,c)"
};

/// A patch of the grid pyramid. Cells of frames narrower than the grid can be
/// empty; those carry no crop and never compete.
struct Patch {
  PatchRef ref;
  std::optional<Raster> crop;
};

/// Identity of a (frame, patch) pair for exhaustion tracking.
struct CandidateKey {
  int frame_index = 0;
  PatchKind kind = PatchKind::global;
  int row = 0;
  int col = 0;
  auto operator<=>(const CandidateKey&) const = default;
};

using ExhaustedSet = std::set<CandidateKey>;

struct Candidate {
  std::size_t position = 0;  // position in the sampled sequence
  int frame_index = 0;
  std::vector<Patch> patches;
};

struct Evidence {
  std::string subquery_id;
  std::size_t frame_position = 0;
  int frame_index = 0;
  PatchRef patch;
  Raster crop;
  double similarity = 0.0;
  bool scored = true;  // false for unscored uniform frames (no_hap)
  ExhaustedSet exhausted;

  nlohmann::json summary() const;
};

struct PatchScore {
  std::size_t position = 0;
  int frame_index = 0;
  PatchRef patch;
};

/// S[t] = cos(E_img(frame t), E_txt(q_vis)).
std::vector<double> score_frames(const FrameSequence& frames, const std::string& q_vis, EmbedClient& embed);

/// Centered moving average with the window truncated at the boundaries.
/// Throws Errc::invalid_kernel for even or non-positive k.
std::vector<double> smooth_scores(std::span<const double> scores, int k);

/// Greedy non-maximum suppression over smoothed scores: up to K disjoint
/// windows of length k (shifted inside the sequence, shorter only when the
/// sequence is), each centered on the best remaining smoothed value.
std::vector<TemporalWindow> select_windows(std::span<const double> smoothed, std::span<const double> raw, int top_k,
                                           int k);

/// Global view first, then N*N grid cells in row-major order.
std::vector<Patch> build_patch_set(const Raster& frame, int grid_n);
std::vector<Patch> global_patch_only(const Raster& frame);

/// Argmax of cos(E_img(crop), E_txt(q_vis)) over every non-exhausted patch.
/// Ties go to the earlier frame, then global, then row-major cell order.
Evidence select_evidence_patch(std::span<const Candidate> candidates, const std::string& q_vis, EmbedClient& embed,
                               const ExhaustedSet& exhausted, std::vector<PatchScore>* scores_out = nullptr);

/// Temporal scouting then grid-pyramid focusing for one sub-query.
/// Emits scout.scores, scout.windows, scout.patch_scores, scout.selected.
Evidence scout(const FrameSequence& frames, const SubQuery& sq, const PipelineConfig& cfg, EmbedClient& embed,
               const ExhaustedSet& exhausted, Trace* trace = nullptr);

/// Unscored full-frame evidence at `count` uniform positions (no_hap).
std::vector<Evidence> uniform_frame_evidence(const FrameSequence& frames, const SubQuery& sq, std::size_t count);

}  // namespace evflow
