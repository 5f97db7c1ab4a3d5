// Regenerates tests/fixtures/traffic_light: six synthetic frames, the mock
// backend script and a two-task manifest.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "evflow/image_io.hpp"
#include "evflow/raster.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using evflow::Rgb;

namespace {

constexpr Rgb kGray{128, 128, 128};
constexpr Rgb kDark{20, 20, 20};
constexpr Rgb kRed{220, 30, 30};
constexpr Rgb kGreen{30, 200, 30};
constexpr Rgb kBlue{30, 60, 200};

bool inside(int x, int y, int x0, int y0, int x1, int y1) { return x >= x0 && x < x1 && y >= y0 && y < y1; }

evflow::Raster frame(int i) {
  const bool red = i >= 2;
  const int car_x = 8 + 6 * i;
  return evflow::Raster::generate(96, 96, [&](int x, int y) {
    if (red && inside(x, y, 76, 6, 84, 14)) return kRed;
    if (!red && inside(x, y, 76, 18, 84, 26)) return kGreen;
    if (inside(x, y, 72, 4, 88, 28)) return kDark;
    if (inside(x, y, car_x, 70, car_x + 40, 90)) return kBlue;
    return kGray;
  });
}

ordered_json rule(ordered_json contains, const std::string& reply) {
  return {{"contains", std::move(contains)}, {"reply", reply}};
}

ordered_json arbitration(const std::string& q_text, const std::string& observation, double confidence) {
  ordered_json body{{"observation", observation}, {"confidence", confidence}, {"conflict", false}};
  return rule({"evidence arbitrator", "Question:\n" + q_text}, body.dump());
}

const char* kQ1 = "Why did the car stop at the intersection?";
const char* kQ2 = "What colour is the car?";

ordered_json script() {
  ordered_json plan1 = ordered_json::array(
      {{{"q_text", "Is the traffic light red?"}, {"q_vis", "red traffic light"}},
       {{"q_text", "Is the car moving?"}, {"q_vis", "car"}}});
  ordered_json plan2 = ordered_json::array({{{"q_text", "What colour is the car body?"}, {"q_vis", "blue car"}}});
  ordered_json refined{{"q_text", "Is the car stationary near the light?"}, {"q_vis", "blue car"}};

  ordered_json chat = ordered_json::array();
  chat.push_back(rule({"Only select the best option.", kQ1}, "Based on the verified evidence, the answer is (A)."));
  chat.push_back(rule({"Only select the best option.", kQ2}, "The car in the frames is painted blue."));
  chat.push_back(rule({"You are a video reasoning planner.", kQ1}, "```json\n" + plan1.dump(2) + "\n```"));
  chat.push_back(rule({"You are a video reasoning planner.", kQ2}, plan2.dump()));
  chat.push_back(rule({"strategic planner", "Is the car moving?"}, refined.dump()));
  chat.push_back(arbitration("Is the traffic light red?", "The traffic light shows a red lamp.", 0.9));
  chat.push_back(arbitration("Is the car moving?", "A car is partially occluded at the frame edge.", 0.4));
  chat.push_back(arbitration("Is the car stationary near the light?", "The blue car is stopped before the light.", 0.85));
  chat.push_back(arbitration("What colour is the car body?", "The car body is blue.", 0.95));
  chat.push_back(arbitration(kQ1, "A red light faces the stopped car.", 0.8));
  chat.push_back(arbitration(kQ2, "A blue car is visible.", 0.8));

  ordered_json judge = ordered_json::array();
  judge.push_back(rule({"zoomed-in crop"}, "Score: 5"));
  judge.push_back(rule({"Query:"}, "Score: 3"));

  ordered_json text{{"red traffic light", {1.0, 0.0, 0.0, 0.0, 1.0}},
                    {"car", {0.0, 0.0, 1.0, 0.0, 0.0}},
                    {"blue car", {0.0, 0.0, 1.0, 0.0, 0.0}},
                    {kQ1, {1.0, 0.0, 0.0, 0.0, 1.0}},
                    {kQ2, {0.0, 0.0, 1.0, 0.0, 0.0}}};
  ordered_json palette = ordered_json::array();
  for (Rgb c : {kRed, kGreen, kBlue, kGray, kDark}) palette.push_back({c.r, c.g, c.b});

  return {{"chat", chat}, {"judge", judge}, {"embeddings", {{"palette", palette}, {"text", text}}}};
}

ordered_json task(const std::string& id, const char* question, ordered_json options, const std::string& answer) {
  return {{"id", id}, {"frames_dir", "frames"}, {"question", question}, {"options", std::move(options)},
          {"answer", answer}};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("tests/fixtures/traffic_light");
  const fs::path frames = root / "frames";
  fs::create_directories(frames);
  for (int i = 0; i < 6; ++i) {
    evflow::write_png(frame(i), frames / ("frame_" + std::to_string(i) + ".png"));
  }
  std::ofstream(frames / "meta.json") << ordered_json{{"source", "traffic_light"}, {"total_source_frames", 6}}.dump(2)
                                      << "\n";
  std::ofstream(root / "script.json") << script().dump(2) << "\n";

  auto opt = [](const char* l, const char* t) { return ordered_json{{"letter", l}, {"text", t}}; };
  std::ofstream manifest(root / "manifest.jsonl");
  manifest << task("intersection", kQ1,
                   {opt("A", "The traffic light turned red"), opt("B", "A pedestrian crossed the road"),
                    opt("C", "The car ran out of fuel"), opt("D", "The driver was pulled over by police")},
                   "A")
                  .dump()
           << "\n";
  manifest << task("car_colour", kQ2,
                   {opt("A", "Red"), opt("B", "Blue"), opt("C", "Green"), opt("D", "White")}, "B")
                  .dump()
           << "\n";
  std::cout << "fixture written to " << root.string() << "\n";
  return 0;
}
