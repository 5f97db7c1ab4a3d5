#include <set>

#include <gtest/gtest.h>

#include "evflow/error.hpp"
#include "evflow/perception.hpp"
#include "support.hpp"

using namespace evflow;

namespace {

ScriptedEmbedder planted(const FrameSequence& frames, const std::set<int>& hits) {
  EmbeddingTable t;
  t.text["target"] = {1.0, 0.0, 0.0};
  for (const auto& f : frames.frames()) {
    t.images[f.raster.digest()] = hits.contains(f.index) ? std::vector<double>{1, 0, 0} : std::vector<double>{0, 1, 0};
  }
  return ScriptedEmbedder(t);
}

std::vector<double> brute_smooth(const std::vector<double>& s, int k) {
  const int n = static_cast<int>(s.size()), h = (k - 1) / 2;
  std::vector<double> out;
  for (int t = 0; t < n; ++t) {
    double sum = 0;
    int c = 0;
    for (int j = t - h; j <= t + h; ++j) {
      if (j >= 0 && j < n) {
        sum += s[static_cast<std::size_t>(j)];
        ++c;
      }
    }
    out.push_back(sum / c);
  }
  return out;
}

}  // namespace

TEST(ScoreFrames, PlantedUnitVectors) {
  const auto frames = testkit::id_frames(6);
  auto embed = planted(frames, {3});
  EXPECT_EQ(score_frames(frames, "target", embed), (std::vector<double>{0, 0, 0, 1, 0, 0}));
  auto all = planted(frames, {0, 1, 2, 3, 4, 5});
  for (double s : score_frames(frames, "target", all)) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(ScoreFrames, MatchesDotProductOracle) {
  testkit::Rng rng(8);
  const auto frames = testkit::id_frames(20);
  EmbeddingTable t;
  const auto q = rng.reals(7, -1, 1);
  t.text["q"] = q;
  std::vector<std::vector<double>> img;
  for (const auto& f : frames.frames()) {
    img.push_back(rng.reals(7, -1, 1));
    t.images[f.raster.digest()] = img.back();
  }
  ScriptedEmbedder e(t);
  const auto s = score_frames(frames, "q", e);
  for (std::size_t i = 0; i < img.size(); ++i) {
    double dot = 0, a = 0, b = 0;
    for (std::size_t d = 0; d < q.size(); ++d) {
      dot += img[i][d] * q[d];
      a += img[i][d] * img[i][d];
      b += q[d] * q[d];
    }
    EXPECT_NEAR(s[i], dot / std::sqrt(a * b), 1e-9);
  }
}

TEST(Smooth, SpikeWithKernelThree) {
  const std::vector<double> s{0, 0, 1, 0, 0};
  const auto out = smooth_scores(s, 3);
  const std::vector<double> want{0, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0};
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(out[i], want[i], 1e-15);
}

TEST(Smooth, KernelOneIsIdentity) {
  testkit::Rng rng(1);
  const auto s = rng.reals(17, -1, 1);
  EXPECT_EQ(smooth_scores(s, 1), s);
}

TEST(Smooth, MatchesBruteForceOnRandomVectors) {
  testkit::Rng rng(2);
  for (int i = 0; i < 300; ++i) {
    const auto s = rng.reals(static_cast<std::size_t>(rng.integer(1, 64)), -1, 1);
    const int k = 2 * rng.integer(0, 4) + 1;
    const auto got = smooth_scores(s, k);
    const auto want = brute_smooth(s, k);
    ASSERT_EQ(got.size(), s.size());
    for (std::size_t t = 0; t < s.size(); ++t) EXPECT_NEAR(got[t], want[t], 1e-12);
  }
}

TEST(Smooth, RejectsBadKernels) {
  const std::vector<double> s{1, 2, 3};
  for (int k : {0, 2, 4, -1}) {
    try {
      smooth_scores(s, k);
      FAIL() << k;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::invalid_kernel);
    }
  }
  EXPECT_THROW(smooth_scores(std::vector<double>{}, 3), Error);
}

TEST(Windows, GreedyExample) {
  const std::vector<double> s{0.1, 0.9, 0.8, 0.2, 0.7, 0.75, 0.1, 0.05};
  const auto w = select_windows(s, s, 2, 3);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].start, 0u);
  EXPECT_EQ(w[0].end, 2u);
  EXPECT_EQ(w[1].start, 4u);
  EXPECT_EQ(w[1].end, 6u);
  EXPECT_NEAR(w[0].score, (0.1 + 0.9 + 0.8) / 3, 1e-12);
  EXPECT_EQ(w[0].peak, 1u);
  EXPECT_EQ(w[1].peak, 5u);
}

TEST(Windows, ConstantScoresPickTheSmallestIndex) {
  const std::vector<double> s(9, 0.5);
  const auto w = select_windows(s, s, 1, 3);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].start, 0u);
  EXPECT_EQ(w[0].end, 2u);
  EXPECT_EQ(w[0].peak, 0u);
}

TEST(Windows, ShortSequenceYieldsOneClippedWindow) {
  const std::vector<double> s{0.3, 0.4};
  const auto w = select_windows(s, s, 3, 5);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].start, 0u);
  EXPECT_EQ(w[0].end, 1u);
  EXPECT_EQ(w[0].peak, 1u);
}

TEST(Windows, PeakUsesRawScores) {
  const std::vector<double> smoothed{0.2, 0.5, 0.9, 0.5, 0.2};
  const std::vector<double> raw{0.0, 1.0, 0.5, 0.4, 0.0};
  const auto w = select_windows(smoothed, raw, 1, 3);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].start, 1u);
  EXPECT_EQ(w[0].peak, 1u);
}

TEST(Windows, DisjointBoundedAndCapped) {
  testkit::Rng rng(12);
  for (int i = 0; i < 400; ++i) {
    const auto s = rng.reals(static_cast<std::size_t>(rng.integer(1, 64)), 0, 1);
    const int k = 2 * rng.integer(0, 4) + 1, top = rng.integer(1, 5);
    const auto w = select_windows(s, s, top, k);
    ASSERT_GE(w.size(), 1u);
    EXPECT_LE(w.size(), static_cast<std::size_t>(top));
    for (std::size_t a = 0; a < w.size(); ++a) {
      EXPECT_LE(w[a].length(), static_cast<std::size_t>(k));
      EXPECT_LT(w[a].end, s.size());
      EXPECT_GE(w[a].peak, w[a].start);
      EXPECT_LE(w[a].peak, w[a].end);
      for (std::size_t b = a + 1; b < w.size(); ++b) EXPECT_FALSE(w[a].overlaps(w[b]));
    }
  }
}

TEST(Patches, ExactThreeByThree) {
  const auto p = build_patch_set(Raster::filled(300, 300, {0, 0, 0}), 3);
  ASSERT_EQ(p.size(), 10u);
  EXPECT_EQ(p[0].ref.kind, PatchKind::global);
  EXPECT_EQ(p[0].ref.rect, (Rect{0, 0, 300, 300}));
  EXPECT_EQ(p[5].ref.label(), "cell(1,1)");
  EXPECT_EQ(p[5].ref.rect, (Rect{100, 100, 100, 100}));
}

TEST(Patches, SingleCellGrid) {
  const auto p = build_patch_set(Raster::filled(40, 30, {0, 0, 0}), 1);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].ref.rect, p[1].ref.rect);
}

TEST(Patches, RemainderIsAbsorbedAndTilingIsExact) {
  const auto p = build_patch_set(Raster::filled(301, 301, {0, 0, 0}), 3);
  EXPECT_EQ(p.back().ref.rect.w, 101);
  EXPECT_EQ(p.back().ref.rect.h, 101);
  std::vector<int> cover(301 * 301, 0);
  for (std::size_t i = 1; i < p.size(); ++i) {
    const auto& r = p[i].ref.rect;
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) ++cover[static_cast<std::size_t>(y * 301 + x)];
  }
  for (int c : cover) ASSERT_EQ(c, 1);
}

TEST(Patches, CropsMatchTheirRects) {
  const Raster f = Raster::generate(7, 5, [](int x, int y) {
    return Rgb{static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y), 0};
  });
  for (const auto& p : build_patch_set(f, 2)) {
    ASSERT_TRUE(p.crop);
    EXPECT_EQ(*p.crop, f.crop(p.ref.rect));
  }
  const auto tiny = build_patch_set(Raster::filled(2, 2, {0, 0, 0}), 3);
  EXPECT_EQ(tiny.size(), 10u);
  EXPECT_FALSE(tiny[1].crop.has_value());
}

TEST(EvidencePatch, PlantedCellWins) {
  std::vector<Candidate> cands;
  EmbeddingTable t;
  t.text["q"] = {1.0, 0.0};
  t.default_image = {0.0, 1.0};
  for (int fi : {3, 7, 9}) {
    const Raster frame = Raster::filled(30, 30, {static_cast<std::uint8_t>(fi), 0, 0});
    auto patches = build_patch_set(frame, 3);
    // Give every crop a distinct digest so only the planted one matches.
    for (std::size_t i = 0; i < patches.size(); ++i) {
      patches[i].crop = Raster::filled(2, 2, {static_cast<std::uint8_t>(fi), static_cast<std::uint8_t>(i), 1});
    }
    if (fi == 7) t.images[patches[3].crop->digest()] = {1.0, 0.0};
    cands.push_back({cands.size(), fi, patches});
  }
  ScriptedEmbedder e(t);
  const auto ev = select_evidence_patch(cands, "q", e, {});
  EXPECT_EQ(ev.frame_index, 7);
  EXPECT_EQ(ev.patch.kind, PatchKind::grid_cell);
  EXPECT_EQ(ev.patch.row, 0);
  EXPECT_EQ(ev.patch.col, 2);
  EXPECT_NEAR(ev.similarity, 1.0, 1e-12);
  EXPECT_TRUE(ev.exhausted.contains({7, PatchKind::grid_cell, 0, 2}));
}

TEST(EvidencePatch, TiesGoToEarliestFrameGlobalPatch) {
  EmbeddingTable t;
  t.text["q"] = {1.0, 1.0};
  t.default_image = {1.0, 0.0};
  ScriptedEmbedder e(t);
  std::vector<Candidate> cands;
  for (int fi : {4, 2}) cands.push_back({static_cast<std::size_t>(fi), fi, build_patch_set(testkit::id_frame(fi, 9, 9), 3)});
  const auto ev = select_evidence_patch(cands, "q", e, {});
  EXPECT_EQ(ev.frame_index, 2);
  EXPECT_EQ(ev.patch.kind, PatchKind::global);
}

TEST(EvidencePatch, MatchesBruteForceArgmax) {
  testkit::Rng rng(30);
  for (int trial = 0; trial < 60; ++trial) {
    EmbeddingTable t;
    t.text["q"] = rng.reals(4, -1, 1);
    std::vector<Candidate> cands;
    std::vector<std::tuple<double, int, std::size_t>> flat;  // score, frame, patch ordinal
    const int frames = rng.integer(1, 4), n = rng.integer(1, 4);
    for (int f = 0; f < frames; ++f) {
      auto patches = build_patch_set(Raster::filled(12, 12, {0, 0, 0}), n);
      for (std::size_t i = 0; i < patches.size(); ++i) {
        patches[i].crop = Raster::filled(1, 1, {static_cast<std::uint8_t>(f), static_cast<std::uint8_t>(i), 2});
        t.images[patches[i].crop->digest()] = rng.reals(4, -1, 1);
      }
      cands.push_back({static_cast<std::size_t>(f), f * 10, patches});
    }
    ScriptedEmbedder e(t);
    std::vector<PatchScore> scores;
    const auto ev = select_evidence_patch(cands, "q", e, {}, &scores);
    double best = -2;
    for (const auto& s : scores) best = std::max(best, s.patch.score);
    EXPECT_DOUBLE_EQ(ev.similarity, best);
    EXPECT_EQ(scores.size(), static_cast<std::size_t>(frames * (n * n + 1)));
  }
}

TEST(EvidencePatch, ExhaustionIsMonotoneUntilEmpty) {
  EmbeddingTable t;
  t.text["q"] = {1.0, 0.5};
  t.palette = {{0, 0, 0}, {255, 255, 255}};
  ScriptedEmbedder e(t);
  const Raster f = Raster::generate(6, 6, [](int x, int y) { return (x + y) % 3 ? Rgb{0, 0, 0} : Rgb{255, 255, 255}; });
  const std::vector<Candidate> cands{{0, 0, build_patch_set(f, 2)}};
  ExhaustedSet ex;
  std::set<CandidateKey> seen;
  for (int i = 0; i < 5; ++i) {
    const auto ev = select_evidence_patch(cands, "q", e, ex);
    const CandidateKey key{ev.frame_index, ev.patch.kind, ev.patch.row, ev.patch.col};
    EXPECT_TRUE(seen.insert(key).second);
    ex = ev.exhausted;
  }
  try {
    select_evidence_patch(cands, "q", e, ex);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), Errc::all_candidates_exhausted);
  }
}

TEST(Scout, FixtureFindsTheLampCell) {
  testkit::FixtureBackends fx;
  const auto frames = testkit::fixture_frames();
  Trace trace;
  const SubQuery sq{"sq1", "Is the traffic light red?", "red traffic light", 0, std::nullopt};
  const auto ev = scout(frames, sq, PipelineConfig{}, fx.embed, {}, &trace);
  EXPECT_EQ(ev.frame_index, 2);
  EXPECT_EQ(ev.patch.label(), "cell(0,2)");
  EXPECT_EQ(ev.subquery_id, "sq1");
  for (const char* stage : {"scout.scores", "scout.windows", "scout.patch_scores", "scout.selected"}) {
    EXPECT_EQ(trace.count(stage), 1u) << stage;
  }
}

TEST(Scout, NoSpatialKeepsGlobalPatches) {
  testkit::FixtureBackends fx;
  PipelineConfig cfg;
  cfg.ablations = {Ablation::no_spatial};
  const SubQuery sq{"sq1", "q", "red traffic light", 0, std::nullopt};
  Trace trace;
  const auto ev = scout(testkit::fixture_frames(), sq, cfg, fx.embed, {}, &trace);
  EXPECT_EQ(ev.patch.kind, PatchKind::global);
  for (const auto& s : trace.events().at(2).payload["scores"]) EXPECT_EQ(s["patch"], "global");
}

TEST(Scout, NoTemporalUsesUniformCandidates) {
  const auto frames = testkit::id_frames(30);
  EmbeddingTable t;
  t.text["q"] = {1.0};
  t.default_image = {1.0};
  ScriptedEmbedder e(t);
  PipelineConfig cfg;
  cfg.ablations = {Ablation::no_temporal};
  Trace trace;
  scout(frames, {"sq1", "q", "q", 0, std::nullopt}, cfg, e, {}, &trace);
  EXPECT_EQ(trace.count("scout.scores"), 0u);
  EXPECT_EQ(trace.events().at(0).payload["positions"], (std::vector<int>{0, 10, 20}));
  std::set<int> frames_seen;
  for (const auto& s : trace.events().at(1).payload["scores"]) frames_seen.insert(s["frame_index"].get<int>());
  EXPECT_EQ(frames_seen, (std::set<int>{0, 10, 20}));
}

TEST(Scout, RepeatedCallsNeverReturnTheSamePair) {
  testkit::FixtureBackends fx;
  const auto frames = testkit::fixture_frames();
  const SubQuery sq{"sq2", "Is the car moving?", "car", 0, std::nullopt};
  ExhaustedSet ex;
  std::set<CandidateKey> seen;
  for (int i = 0; i < 6; ++i) {
    const auto ev = scout(frames, sq, PipelineConfig{}, fx.embed, ex);
    EXPECT_TRUE(seen.insert({ev.frame_index, ev.patch.kind, ev.patch.row, ev.patch.col}).second);
    ex = ev.exhausted;
  }
}

TEST(UniformEvidence, FullFramesUnscored) {
  const auto frames = testkit::id_frames(9);
  const auto ev = uniform_frame_evidence(frames, {"sq1", "q", "q", 0, std::nullopt}, 3);
  ASSERT_EQ(ev.size(), 3u);
  EXPECT_EQ(ev[1].frame_index, 3);
  EXPECT_FALSE(ev[1].scored);
  EXPECT_EQ(ev[1].crop, frames[3].raster);
  EXPECT_EQ(ev[1].patch.kind, PatchKind::global);
}
