#include "evflow/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "evflow/error.hpp"
#include "evflow/image_io.hpp"

namespace evflow {

namespace fs = std::filesystem;

namespace {

bool is_frame_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
    const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
    if (da && db) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      std::string_view ra(a.data() + i, ie - i), rb(b.data() + j, je - j);
      while (ra.size() > 1 && ra.front() == '0') ra.remove_prefix(1);
      while (rb.size() > 1 && rb.front() == '0') rb.remove_prefix(1);
      if (ra.size() != rb.size()) return ra.size() < rb.size();
      if (ra != rb) return ra < rb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return a.size() - i < b.size() - j;
  return a < b;
}

FrameManifest scan_frames(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(Errc::io, "frame directory " + dir.string() + " does not exist");
  FrameManifest m;
  m.directory = dir;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_frame_file(entry.path())) m.files.push_back(entry.path());
  }
  if (m.files.empty()) throw Error(Errc::empty_directory, "no PNG or JPEG frames in " + dir.string());
  std::sort(m.files.begin(), m.files.end(),
            [](const fs::path& a, const fs::path& b) {
              return natural_less(a.filename().string(), b.filename().string());
            });
  m.total_source_frames = m.files.size();

  const fs::path meta = dir / "meta.json";
  if (fs::is_regular_file(meta)) {
    std::ifstream in(meta);
    m.meta = nlohmann::json::parse(in, nullptr, false);
    if (m.meta.is_discarded()) throw Error(Errc::schema, meta.string() + " is not valid JSON");
  }
  return m;
}

std::vector<std::size_t> uniform_positions(std::size_t n, std::size_t count) {
  std::vector<std::size_t> out;
  if (n <= count) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(i * n / count);
  return out;
}

FrameSequence load_frames(const fs::path& dir, std::size_t budget) {
  if (budget == 0) throw Error(Errc::invalid_argument, "frame budget must be positive");
  const FrameManifest m = scan_frames(dir);
  std::vector<Frame> frames;
  for (std::size_t pos : uniform_positions(m.files.size(), budget)) {
    frames.push_back({static_cast<int>(pos), decode_image_file(m.files[pos])});
  }
  nlohmann::json meta = m.meta.is_null() ? nlohmann::json::object() : m.meta;
  meta["total_source_frames"] = m.total_source_frames;
  std::string source = dir.filename().string();
  if (source.empty()) source = dir.parent_path().filename().string();
  return FrameSequence(std::move(frames), m.meta.is_object() ? m.meta.value("source", source) : source,
                       std::move(meta));
}

}  // namespace evflow
