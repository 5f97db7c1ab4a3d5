#include <fstream>

#include <gtest/gtest.h>

#include "evflow/error.hpp"
#include "evflow/image_io.hpp"
#include "evflow/ingest.hpp"
#include "evflow/raster.hpp"
#include "evflow/types.hpp"
#include "support.hpp"

using namespace evflow;
namespace fs = std::filesystem;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no evflow::Error thrown";
  return Errc::invalid_argument;
}

Raster random_raster(testkit::Rng& rng, int w, int h) {
  return Raster::generate(w, h, [&](int, int) {
    return Rgb{static_cast<std::uint8_t>(rng.integer(0, 255)), static_cast<std::uint8_t>(rng.integer(0, 255)),
               static_cast<std::uint8_t>(rng.integer(0, 255))};
  });
}

void write_frames(const fs::path& dir, int n) {
  fs::create_directories(dir);
  for (int i = 0; i < n; ++i) write_png(testkit::id_frame(i, 4, 4), dir / ("f" + std::to_string(i) + ".png"));
}

}  // namespace

TEST(Raster, RejectsBadDimensionsAndShortBuffers) {
  EXPECT_THROW(Raster(0, 3, {}), Error);
  EXPECT_THROW(Raster(2, 2, std::vector<std::uint8_t>(11)), Error);
  EXPECT_NO_THROW(Raster(2, 2, std::vector<std::uint8_t>(12)));
}

TEST(Raster, CropCopiesTheRequestedPixels) {
  const Raster r = Raster::generate(5, 4, [](int x, int y) {
    return Rgb{static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y), 7};
  });
  const Raster c = r.crop({1, 2, 3, 2});
  ASSERT_EQ(c.width(), 3);
  ASSERT_EQ(c.height(), 2);
  EXPECT_EQ(c.pixel(0, 0), (Rgb{1, 2, 7}));
  EXPECT_EQ(c.pixel(2, 1), (Rgb{3, 3, 7}));
  EXPECT_THROW(r.crop({4, 0, 2, 1}), Error);
  EXPECT_THROW(r.crop({0, 0, 0, 1}), Error);
}

TEST(Raster, DigestSeparatesContentAndShape) {
  const Raster a = Raster::filled(2, 3, {1, 2, 3});
  const Raster b = Raster::filled(3, 2, {1, 2, 3});
  EXPECT_EQ(a.digest(), Raster::filled(2, 3, {1, 2, 3}).digest());
  EXPECT_NE(a.digest(), b.digest());
  EXPECT_NE(a.digest(), Raster::filled(2, 3, {1, 2, 4}).digest());
  EXPECT_EQ(a.digest().size(), 64u);
}

TEST(ImageIo, Sha256AndBase64MatchKnownVectors) {
  const std::string abc = "abc";
  const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size());
  EXPECT_EQ(sha256_hex(bytes), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const std::string hello = "hello";
  EXPECT_EQ(base64_encode({reinterpret_cast<const std::uint8_t*>(hello.data()), hello.size()}), "aGVsbG8=");
  const auto back = base64_decode("aGVsbG8=");
  EXPECT_EQ(std::string(back.begin(), back.end()), "hello");
  EXPECT_THROW(base64_decode("a$b="), Error);
}

TEST(ImageIo, Base64RoundTripsRandomBuffers) {
  testkit::Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(rng.integer(0, 100)));
    for (auto& b : buf) b = static_cast<std::uint8_t>(rng.integer(0, 255));
    EXPECT_EQ(base64_decode(base64_encode(buf)), buf);
  }
}

TEST(ImageIo, PngRoundTripIsLossless) {
  testkit::Rng rng(5);
  for (int i = 0; i < 25; ++i) {
    const Raster r = random_raster(rng, rng.integer(1, 40), rng.integer(1, 40));
    EXPECT_EQ(decode_image(encode_png(r)), r);
  }
}

TEST(ImageIo, GarbageBytesRaiseDecodeError) {
  const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5};
  EXPECT_EQ(code_of([&] { decode_image(junk, "junk.png"); }), Errc::decode_error);
}

TEST(Ingest, UniformPositionsFollowTheFloorFormula) {
  EXPECT_EQ(uniform_positions(8, 32), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(uniform_positions(30, 3), (std::vector<std::size_t>{0, 10, 20}));
  EXPECT_EQ(uniform_positions(10, 4), (std::vector<std::size_t>{0, 2, 5, 7}));
  const auto p = uniform_positions(64, 32);
  ASSERT_EQ(p.size(), 32u);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], 2 * i);
}

TEST(Ingest, UniformPositionsAreIncreasingAndInRange) {
  testkit::Rng rng(9);
  for (int t = 0; t < 500; ++t) {
    const auto n = static_cast<std::size_t>(rng.integer(1, 300));
    const auto count = static_cast<std::size_t>(rng.integer(1, 64));
    const auto p = uniform_positions(n, count);
    ASSERT_EQ(p.size(), std::min(n, count));
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_LT(p[i], n);
      if (i) EXPECT_LT(p[i - 1], p[i]);
    }
  }
}

TEST(Ingest, NaturalOrderComparesDigitRunsByValue) {
  EXPECT_TRUE(natural_less("frame_9.png", "frame_10.png"));
  EXPECT_FALSE(natural_less("frame_10.png", "frame_9.png"));
  EXPECT_TRUE(natural_less("a.png", "b.png"));
  EXPECT_TRUE(natural_less("f2", "f2a"));
}

TEST(Ingest, LoadsAllFramesUnderBudget) {
  const auto dir = testkit::scratch_dir("ingest_small");
  write_frames(dir, 8);
  const auto seq = load_frames(dir, 32);
  ASSERT_EQ(seq.size(), 8u);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(seq[static_cast<std::size_t>(i)].index, i);
    EXPECT_EQ(seq[static_cast<std::size_t>(i)].raster, testkit::id_frame(i, 4, 4));
  }
}

TEST(Ingest, SubsamplesLongDirectoriesUniformly) {
  const auto dir = testkit::scratch_dir("ingest_large");
  write_frames(dir, 64);
  const auto seq = load_frames(dir, 32);
  ASSERT_EQ(seq.size(), 32u);
  for (std::size_t i = 0; i < 32; ++i) {
    EXPECT_EQ(seq[i].index, static_cast<int>(2 * i));
    EXPECT_EQ(seq[i].raster, testkit::id_frame(static_cast<int>(2 * i), 4, 4));
  }
  EXPECT_EQ(seq.meta().value("total_source_frames", 0), 64);
  EXPECT_EQ(seq.digest(), load_frames(dir, 32).digest());
}

TEST(Ingest, EmptyAndMissingDirectoriesAreReported) {
  const auto dir = testkit::scratch_dir("ingest_empty");
  std::ofstream(dir / "notes.txt") << "not a frame";
  EXPECT_EQ(code_of([&] { load_frames(dir, 32); }), Errc::empty_directory);
  EXPECT_EQ(code_of([&] { load_frames(dir / "nope", 32); }), Errc::io);
}

TEST(Ingest, FixtureCarriesMetadata) {
  const auto seq = testkit::fixture_frames();
  EXPECT_EQ(seq.size(), 6u);
  EXPECT_EQ(seq.source_id(), "traffic_light");
  EXPECT_EQ(seq[0].raster.width(), 96);
}

TEST(Types, FrameSequenceRequiresIncreasingIndices) {
  const Raster r = Raster::filled(1, 1, {0, 0, 0});
  EXPECT_THROW(FrameSequence({}, "x"), Error);
  EXPECT_THROW(FrameSequence({{2, r}, {2, r}}, "x"), Error);
  EXPECT_THROW(FrameSequence({{3, r}, {1, r}}, "x"), Error);
  EXPECT_NO_THROW(FrameSequence({{0, r}, {5, r}}, "x"));
}

TEST(Types, EmbeddingVectorValidation) {
  EXPECT_THROW(EmbeddingVector({}), Error);
  EXPECT_THROW(EmbeddingVector({1.0, std::nan("")}), Error);
  EXPECT_EQ(code_of([] { EmbeddingVector::normalized_from({0.0, 0.0}); }), Errc::zero_vector);
  const auto v = EmbeddingVector::normalized_from({3.0, 4.0});
  EXPECT_NEAR(v.norm(), 1.0, 1e-12);
  EXPECT_TRUE(v.normalized());
}
