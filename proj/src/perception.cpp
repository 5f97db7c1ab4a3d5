#include "evflow/perception.hpp"

#include <algorithm>
#include <numeric>

#include "evflow/error.hpp"
#include "evflow/ingest.hpp"

namespace evflow {

using nlohmann::json;

std::string PatchRef::label() const {
  if (kind == PatchKind::global) return "global";
  return "cell(" + std::to_string(row) + "," + std::to_string(col) + ")";
}

json Evidence::summary() const {
  return {{"subquery_id", subquery_id},
          {"frame_position", frame_position},
          {"frame_index", frame_index},
          {"patch", patch.label()},
          {"rect", {patch.rect.x, patch.rect.y, patch.rect.w, patch.rect.h}},
          {"similarity", scored ? json(similarity) : json(nullptr)},
          {"crop_digest", crop.digest()},
          {"exhausted", exhausted.size()}};
}

std::vector<double> score_frames(const FrameSequence& frames, const std::string& q_vis, EmbedClient& embed) {
  const EmbeddingVector query = embed.embed_text(q_vis);
  std::vector<double> scores;
  scores.reserve(frames.size());
  for (const auto& f : frames.frames()) scores.push_back(cosine_similarity(embed.embed_image(f.raster), query));
  return scores;
}

namespace {

void check_kernel(int k) {
  if (k < 1 || k % 2 == 0) {
    throw Error(Errc::invalid_kernel, "smoothing kernel must be odd and >= 1, got " + std::to_string(k));
  }
}

}  // namespace

std::vector<double> smooth_scores(std::span<const double> scores, int k) {
  check_kernel(k);
  if (scores.empty()) throw Error(Errc::invalid_argument, "cannot smooth an empty score list");
  const std::size_t n = scores.size();
  const auto h = static_cast<std::size_t>(k - 1) / 2;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + scores[i];
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t >= h ? t - h : 0;
    const std::size_t hi = std::min(n - 1, t + h);
    out[t] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
  }
  if (k == 1) out.assign(scores.begin(), scores.end());
  return out;
}

std::vector<TemporalWindow> select_windows(std::span<const double> smoothed, std::span<const double> raw, int top_k,
                                           int k) {
  check_kernel(k);
  if (top_k < 1) throw Error(Errc::invalid_argument, "top_k must be >= 1");
  if (smoothed.empty() || smoothed.size() != raw.size()) {
    throw Error(Errc::invalid_argument, "smoothed and raw scores must be non-empty and of equal length");
  }
  const std::size_t n = smoothed.size();
  const auto len = static_cast<std::size_t>(k);
  const std::size_t h = (len - 1) / 2;

  auto window_at = [&](std::size_t t) {
    TemporalWindow w;
    if (n <= len) {
      w.start = 0;
      w.end = n - 1;
    } else {
      w.start = std::min(t >= h ? t - h : 0, n - len);
      w.end = w.start + len - 1;
    }
    return w;
  };

  std::vector<TemporalWindow> selected;
  std::vector<bool> suppressed(n, false);
  while (selected.size() < static_cast<std::size_t>(top_k)) {
    std::optional<std::size_t> best;
    for (std::size_t t = 0; t < n; ++t) {
      if (suppressed[t]) continue;
      const auto w = window_at(t);
      const bool clash = std::any_of(selected.begin(), selected.end(), [&](const auto& s) { return s.overlaps(w); });
      if (clash) {
        suppressed[t] = true;
        continue;
      }
      if (!best || smoothed[t] > smoothed[*best]) best = t;
    }
    if (!best) break;
    auto w = window_at(*best);
    double sum = 0.0;
    w.peak = w.start;
    for (std::size_t i = w.start; i <= w.end; ++i) {
      sum += smoothed[i];
      if (raw[i] > raw[w.peak]) w.peak = i;
    }
    w.score = sum / static_cast<double>(w.length());
    suppressed[*best] = true;
    selected.push_back(w);
  }
  return selected;
}

std::vector<Patch> global_patch_only(const Raster& frame) {
  Patch g;
  g.ref.kind = PatchKind::global;
  g.ref.rect = frame.bounds();
  g.crop = frame;
  return {std::move(g)};
}

std::vector<Patch> build_patch_set(const Raster& frame, int grid_n) {
  if (grid_n < 1) throw Error(Errc::invalid_argument, "grid size must be >= 1");
  std::vector<Patch> patches = global_patch_only(frame);
  const long long W = frame.width();
  const long long H = frame.height();
  const long long N = grid_n;
  for (int r = 0; r < grid_n; ++r) {
    const auto y0 = static_cast<int>(r * H / N);
    const auto y1 = static_cast<int>((r + 1) * H / N);
    for (int c = 0; c < grid_n; ++c) {
      const auto x0 = static_cast<int>(c * W / N);
      const auto x1 = static_cast<int>((c + 1) * W / N);
      Patch p;
      p.ref.kind = PatchKind::grid_cell;
      p.ref.row = r;
      p.ref.col = c;
      p.ref.rect = {x0, y0, x1 - x0, y1 - y0};
      if (!p.ref.rect.empty()) p.crop = frame.crop(p.ref.rect);
      patches.push_back(std::move(p));
    }
  }
  return patches;
}

Evidence select_evidence_patch(std::span<const Candidate> candidates, const std::string& q_vis, EmbedClient& embed,
                               const ExhaustedSet& exhausted, std::vector<PatchScore>* scores_out) {
  std::vector<const Candidate*> ordered;
  for (const auto& c : candidates) ordered.push_back(&c);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Candidate* a, const Candidate* b) { return a->position < b->position; });

  const EmbeddingVector query = embed.embed_text(q_vis);
  const Candidate* best_cand = nullptr;
  const Patch* best_patch = nullptr;
  double best_score = 0.0;
  for (const Candidate* cand : ordered) {
    for (const Patch& patch : cand->patches) {
      if (!patch.crop) continue;
      const CandidateKey key{cand->frame_index, patch.ref.kind, patch.ref.row, patch.ref.col};
      if (exhausted.contains(key)) continue;
      const double s = cosine_similarity(embed.embed_image(*patch.crop), query);
      if (scores_out) {
        PatchRef ref = patch.ref;
        ref.score = s;
        scores_out->push_back({cand->position, cand->frame_index, ref});
      }
      if (!best_patch || s > best_score) {
        best_cand = cand;
        best_patch = &patch;
        best_score = s;
      }
    }
  }
  if (!best_patch) throw Error(Errc::all_candidates_exhausted, "every candidate patch was already tried");

  Evidence e{.subquery_id = {},
             .frame_position = best_cand->position,
             .frame_index = best_cand->frame_index,
             .patch = best_patch->ref,
             .crop = *best_patch->crop,
             .similarity = best_score,
             .scored = true,
             .exhausted = exhausted};
  e.patch.score = best_score;
  e.exhausted.insert({best_cand->frame_index, best_patch->ref.kind, best_patch->ref.row, best_patch->ref.col});
  return e;
}

Evidence scout(const FrameSequence& frames, const SubQuery& sq, const PipelineConfig& cfg, EmbedClient& embed,
               const ExhaustedSet& exhausted, Trace* trace) {
  sq.validate();
  std::vector<std::size_t> keyframes;
  if (cfg.has(Ablation::no_temporal)) {
    keyframes = uniform_positions(frames.size(), static_cast<std::size_t>(cfg.top_k));
    trace_emit(trace, "scout.windows", {{"subquery_id", sq.id}, {"mode", "uniform"}, {"positions", keyframes}});
  } else {
    const auto raw = score_frames(frames, sq.q_vis, embed);
    trace_emit(trace, "scout.scores", {{"subquery_id", sq.id}, {"q_vis", sq.q_vis}, {"scores", raw}});
    const auto smoothed = smooth_scores(raw, cfg.smooth_kernel);
    const auto windows = select_windows(smoothed, raw, cfg.top_k, cfg.smooth_kernel);
    json listed = json::array();
    for (const auto& w : windows) {
      listed.push_back({{"start", w.start}, {"end", w.end}, {"score", w.score}, {"peak", w.peak}});
      keyframes.push_back(w.peak);
    }
    std::sort(keyframes.begin(), keyframes.end());
    trace_emit(trace, "scout.windows",
               {{"subquery_id", sq.id}, {"mode", "temporal"}, {"smoothed", smoothed}, {"windows", listed}});
  }

  std::vector<Candidate> candidates;
  for (std::size_t pos : keyframes) {
    const Frame& f = frames[pos];
    candidates.push_back({pos, f.index,
                          cfg.has(Ablation::no_spatial) ? global_patch_only(f.raster)
                                                        : build_patch_set(f.raster, cfg.grid_n)});
  }

  std::vector<PatchScore> scores;
  Evidence e = select_evidence_patch(candidates, sq.q_vis, embed, exhausted, &scores);
  e.subquery_id = sq.id;

  json listed = json::array();
  for (const auto& s : scores) {
    listed.push_back({{"frame_index", s.frame_index}, {"patch", s.patch.label()}, {"score", s.patch.score}});
  }
  trace_emit(trace, "scout.patch_scores", {{"subquery_id", sq.id}, {"scores", listed}});
  trace_emit(trace, "scout.selected", e.summary());
  return e;
}

std::vector<Evidence> uniform_frame_evidence(const FrameSequence& frames, const SubQuery& sq, std::size_t count) {
  std::vector<Evidence> out;
  for (std::size_t pos : uniform_positions(frames.size(), count)) {
    const Frame& f = frames[pos];
    Evidence e{.subquery_id = sq.id,
               .frame_position = pos,
               .frame_index = f.index,
               .patch = PatchRef{PatchKind::global, 0, 0, f.raster.bounds(), 0.0},
               .crop = f.raster,
               .similarity = 0.0,
               .scored = false,
               .exhausted = {}};
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace evflow
