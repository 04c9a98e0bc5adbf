#include "bsda/dataset.hpp"

#include <array>
#include <sstream>

#include "bsda/error.hpp"
#include "bsda/io.hpp"
#include "bsda/synth.hpp"

namespace bsda {

namespace {

constexpr std::array<std::string_view, 3> kSplitNames{"train", "val", "test"};

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

}  // namespace

std::string_view split_name(Split s) noexcept { return kSplitNames[static_cast<std::size_t>(s)]; }

Split parse_split(std::string_view name) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i) {
    if (kSplitNames[i] == name) return static_cast<Split>(i);
  }
  throw Error(Errc::FormatError, "unknown split '" + std::string(name) + "'");
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir) {
  const std::filesystem::path manifest = dir / "manifest.csv";
  std::istringstream in(io::read_file(manifest));
  std::string line;
  if (!std::getline(in, line) || trim(line) != "id,class,split") {
    throw Error(Errc::FormatError, manifest.string() + ": expected header 'id,class,split'");
  }
  std::vector<Sample> samples;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::array<std::string, 3> fields;
    std::istringstream ls(line);
    for (auto& f : fields) {
      if (!std::getline(ls, f, ',')) {
        throw Error(Errc::FormatError, manifest.string() + ":" + std::to_string(line_no) + ": expected 3 fields");
      }
    }
    Sample s{fields[0], io::read_image(dir / "images" / (fields[0] + ".pgm")),
             io::read_mask(dir / "masks" / (fields[0] + ".pgm")), static_cast<int>(parse_class(fields[1])),
             parse_split(fields[2])};
    if (s.image.height() != s.mask.height() || s.image.width() != s.mask.width()) {
      throw Error(Errc::DimMismatch, "image and mask of " + s.id + " differ in size");
    }
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw Error(Errc::DataEmpty, manifest.string() + " lists no samples");
  return samples;
}

std::vector<const Sample*> select_split(std::span<const Sample> samples, Split split) {
  std::vector<const Sample*> out;
  for (const Sample& s : samples) {
    if (s.split == split) out.push_back(&s);
  }
  return out;
}

}  // namespace bsda
