#include "doctest.h"

#include <cstring>
#include <filesystem>

#include "bsda/config.hpp"
#include "bsda/dataset.hpp"
#include "bsda/error.hpp"
#include "bsda/io.hpp"
#include "bsda/model.hpp"
#include "support.hpp"

using namespace bsda;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("bsda_io_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected throw");
  return Errc::IoError;
}

io::TensorFile random_tensor_file(std::mt19937_64& rng) {
  io::TensorFile t;
  t.dtype = rng() % 2 ? io::DType::F64 : io::DType::F32;
  const int ndim = 1 + static_cast<int>(rng() % 4);
  std::size_t n = 1;
  for (int d = 0; d < ndim; ++d) {
    t.dims.push_back(1 + static_cast<std::uint32_t>(rng() % 5));
    n *= t.dims.back();
  }
  std::normal_distribution<double> normal(0.0, 100.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = normal(rng);
    t.values.push_back(t.dtype == io::DType::F32 ? static_cast<double>(static_cast<float>(v)) : v);
  }
  return t;
}

BsdaConfig tiny_config() {
  BsdaConfig c;
  c.image_size = 16;
  c.encoder_widths = {2, 4, 4, 4};
  c.decoder_width = 8;
  return c;
}

}  // namespace

TEST_CASE("pgm canonical encoding") {
  const io::Gray8 g{2, 3, {0, 1, 2, 253, 254, 255}};
  const std::string bytes = io::encode_pgm(g);
  CHECK(bytes.substr(0, 11) == "P5\n3 2\n255\n");
  CHECK(bytes.size() == 17);
  CHECK(io::parse_pgm(bytes) == g);
}

TEST_CASE("pgm parsing accepts comments and rejects garbage") {
  const std::string with_comment = std::string("P5 # made by hand\n2 1\n# depth\n255\n") + '\x00' + '\xff';
  const io::Gray8 g = io::parse_pgm(with_comment);
  CHECK(g.width == 2);
  CHECK(g.pixels == std::vector<std::uint8_t>{0, 255});
  CHECK(code_of([] { io::parse_pgm("P2\n1 1\n255\n0"); }) == Errc::FormatError);
  CHECK(code_of([] { io::parse_pgm("P5\n2 2\n255\n\x01"); }) == Errc::FormatError);
  CHECK(code_of([] { io::parse_pgm("P5\n1 1\n65535\n\x01\x01"); }) == Errc::FormatError);
  CHECK(code_of([] { io::parse_pgm(""); }) == Errc::FormatError);
}

TEST_CASE("mask threshold at 128") {
  const BinaryMask m = io::mask_from_gray({1, 4, {0, 127, 128, 255}});
  CHECK(m.cells()[0] == 0);
  CHECK(m.cells()[1] == 0);
  CHECK(m.cells()[2] == 1);
  CHECK(m.cells()[3] == 1);
  CHECK(io::mask_to_gray(m).pixels == std::vector<std::uint8_t>{0, 0, 255, 255});
}

TEST_CASE("bsdt byte layout") {
  io::TensorFile t{io::DType::F64, {2, 1}, {1.0, -2.5}};
  const std::string b = io::encode_bsdt(t);
  REQUIRE(b.size() == 4 + 4 + 8 + 16);
  CHECK(b.substr(0, 4) == "BSDT");
  CHECK(b[4] == 1);
  CHECK(b[5] == 1);
  CHECK(b[6] == 2);
  CHECK(b[7] == 0);
  CHECK(b.substr(8, 4) == std::string("\x02\x00\x00\x00", 4));
  double v;
  std::memcpy(&v, b.data() + 24, 8);
  CHECK(v == -2.5);
  CHECK(io::decode_bsdt(b) == t);

  io::TensorFile f{io::DType::F32, {3}, {0.5, 1.0, -4.0}};
  CHECK(io::encode_bsdt(f).size() == 4 + 4 + 4 + 12);
  CHECK(io::decode_bsdt(io::encode_bsdt(f)) == f);
}

TEST_CASE("bsdt rejects malformed input") {
  const std::string good = io::encode_bsdt({io::DType::F64, {1}, {3.0}});
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(code_of([&] { io::decode_bsdt(bad_magic); }) == Errc::FormatError);
  std::string bad_version = good;
  bad_version[4] = 2;
  CHECK(code_of([&] { io::decode_bsdt(bad_version); }) == Errc::FormatError);
  CHECK(code_of([&] { io::decode_bsdt(good.substr(0, good.size() - 1)); }) == Errc::FormatError);
  CHECK(code_of([&] { io::decode_bsdt(good + "x"); }) == Errc::FormatError);
  CHECK(code_of([] { io::encode_bsdt({io::DType::F64, {2}, {1.0}}); }) == Errc::ShapeMismatch);
}

TEST_CASE("bsdc layout and duplicate names") {
  const std::vector<io::NamedTensorFile> recs{{"a", {io::DType::F64, {1}, {1.0}}}, {"bb", {io::DType::F32, {2}, {1.0, 2.0}}}};
  const std::string b = io::encode_bsdc(recs);
  CHECK(b.substr(0, 4) == "BSDC");
  CHECK(b[4] == 1);
  CHECK(b.substr(5, 4) == std::string("\x02\x00\x00\x00", 4));
  CHECK(b.substr(9, 3) == std::string("\x01\x00" "a", 3));
  CHECK(io::decode_bsdc(b) == recs);
  const std::vector<io::NamedTensorFile> dup{recs[0], recs[0]};
  CHECK(code_of([&] { io::encode_bsdc(dup); }) == Errc::FormatError);
}

TEST_CASE("property: formats round-trip write-read-write byte for byte") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 50; ++trial) {
    const BinaryMask m = test::random_mask(1 + static_cast<int>(rng() % 20), 1 + static_cast<int>(rng() % 20), 0.5, rng);
    const std::string pm = io::encode_pgm(io::mask_to_gray(m));
    CHECK(io::mask_from_gray(io::parse_pgm(pm)) == m);
    CHECK(io::encode_pgm(io::mask_to_gray(io::mask_from_gray(io::parse_pgm(pm)))) == pm);

    const std::string pi = io::encode_pgm(io::image_to_gray(test::random_unit_field(9, 11, rng)));
    CHECK(io::encode_pgm(io::image_to_gray(io::image_from_gray(io::parse_pgm(pi)))) == pi);

    const io::TensorFile t = random_tensor_file(rng);
    const std::string bt = io::encode_bsdt(t);
    CHECK(io::decode_bsdt(bt) == t);
    CHECK(io::encode_bsdt(io::decode_bsdt(bt)) == bt);

    std::vector<io::NamedTensorFile> recs;
    const int n = static_cast<int>(rng() % 5);
    for (int k = 0; k < n; ++k) recs.push_back({"t" + std::to_string(k), random_tensor_file(rng)});
    const std::string bc = io::encode_bsdc(recs);
    CHECK(io::encode_bsdc(io::decode_bsdc(bc)) == bc);
  }
}

TEST_CASE("file helpers name the path on failure") {
  const fs::path missing = "/nonexistent/dir/file.pgm";
  try {
    io::read_file(missing);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::IoError);
    CHECK(std::string(e.what()).find(missing.string()) != std::string::npos);
  }
  CHECK(code_of([&] { io::write_file(missing, "x"); }) == Errc::IoError);
}

TEST_CASE("unparseable mask files raise InvalidMask with the file name") {
  TempDir dir;
  io::write_file(dir.path / "bad.pgm", "not a pgm");
  try {
    io::read_mask(dir.path / "bad.pgm");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidMask);
    CHECK(std::string(e.what()).find("bad.pgm") != std::string::npos);
  }
}

TEST_CASE("fields round-trip through files") {
  TempDir dir;
  std::mt19937_64 rng(52);
  const ScalarField f = test::random_unit_field(7, 5, rng);
  io::write_field(dir.path / "f.bsdt", f);
  const ScalarField back = io::read_field(dir.path / "f.bsdt", FieldKind::Heatmap);
  CHECK(back.values().size() == f.values().size());
  CHECK(test::max_abs_diff(back.values(), f.values()) == 0.0);
  CHECK(back.kind() == FieldKind::Heatmap);
}

TEST_CASE("checkpoints round-trip and reject mismatched models") {
  TempDir dir;
  BsdaModel a(tiny_config(), 1);
  io::save_checkpoint(dir.path / "a.bsdc", a);
  BsdaModel b(tiny_config(), 2);
  io::load_checkpoint(dir.path / "a.bsdc", b);
  const auto sa = a.state();
  const auto sb = b.state();
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(*sa[i].tensor == *sb[i].tensor);
  io::save_checkpoint(dir.path / "b.bsdc", b);
  CHECK(io::read_file(dir.path / "a.bsdc") == io::read_file(dir.path / "b.bsdc"));

  BsdaConfig wider = tiny_config();
  wider.encoder_widths = {4, 4, 4, 4};
  BsdaModel c(wider, 1);
  const BsdaModel untouched(wider, 1);
  CHECK(code_of([&] { io::load_checkpoint(dir.path / "a.bsdc", c); }) == Errc::ShapeMismatch);
  BsdaConfig no_b = tiny_config();
  no_b.ablation.boundary_branch = false;
  BsdaModel d(no_b, 1);
  CHECK(code_of([&] { io::load_checkpoint(dir.path / "a.bsdc", d); }) == Errc::ShapeMismatch);
  io::write_file(dir.path / "junk.bsdc", "BSDC");
  CHECK(code_of([&] { io::load_checkpoint(dir.path / "junk.bsdc", b); }) == Errc::FormatError);
}

TEST_CASE("config json round-trips and rejects unknown keys") {
  BsdaConfig c;
  c.tau = 5;
  c.epochs = 9;
  c.ablation.fusion = false;
  CHECK(bsda_config_from_json(to_json(c)) == c);
  CHECK(bsda_config_from_json(Json::parse(R"({"epochs": 30})")).epochs == 30);
  CHECK(code_of([] { bsda_config_from_json(Json::parse(R"({"epoch": 30})")); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { bsda_config_from_json(Json::parse(R"({"epochs": "many"})")); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { bsda_config_from_json(Json::parse(R"({"tau": 300})")); }) == Errc::ConfigInvalid);
  CHECK(code_of([] { bsda_config_from_json(Json::parse(R"({"ablation": {"fusion": 1}})")); }) == Errc::ConfigInvalid);

  SynthConfig s;
  s.seed = 77;
  s.n_per_class = 4;
  CHECK(synth_config_from_json(to_json(s)) == s);
  CHECK(code_of([] { synth_config_from_json(Json::parse(R"({"shapes": {"odd": {}}})")); }) == Errc::ConfigInvalid);
  CHECK(dump_json(Json::parse(R"({"a":1})")) == "{\n  \"a\": 1\n}\n");
}

TEST_CASE("dataset loading") {
  TempDir dir;
  fs::create_directories(dir.path / "images");
  fs::create_directories(dir.path / "masks");
  BinaryMask m(4, 4);
  m.set(1, 1, true);
  io::write_mask(dir.path / "masks" / "a.pgm", m);
  io::write_image(dir.path / "images" / "a.pgm", ScalarField(4, 4, FieldKind::Other, 0.5));
  io::write_file(dir.path / "manifest.csv", "id,class,split\na,reduced,val\n");
  const std::vector<Sample> s = load_dataset(dir.path);
  REQUIRE(s.size() == 1);
  CHECK(s[0].label == 2);
  CHECK(s[0].split == Split::Val);
  CHECK(s[0].mask == m);
  CHECK(select_split(s, Split::Val).size() == 1);
  CHECK(select_split(s, Split::Test).empty());

  io::write_file(dir.path / "manifest.csv", "id,class,split\n");
  CHECK(code_of([&] { load_dataset(dir.path); }) == Errc::DataEmpty);
  io::write_file(dir.path / "manifest.csv", "name,label\n");
  CHECK(code_of([&] { load_dataset(dir.path); }) == Errc::FormatError);
  io::write_file(dir.path / "manifest.csv", "id,class,split\na,reduced,holdout\n");
  CHECK(code_of([&] { load_dataset(dir.path); }) == Errc::FormatError);
  CHECK(code_of([&] { load_dataset(dir.path / "missing"); }) == Errc::IoError);
}
