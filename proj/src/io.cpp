#include "bsda/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cctype>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "bsda/error.hpp"
#include "bsda/model.hpp"

namespace bsda::io {

namespace {

[[noreturn]] void format_error(const std::string& what) { throw Error(Errc::FormatError, what); }

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string_view bytes, std::size_t& offset) : bytes_(bytes), offset_(offset) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - offset_ < n) format_error(std::string("truncated ") + what);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(bytes_[offset_++]);
  }
  std::uint64_t uint(int width, const char* what) {
    need(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[offset_ + i])) << (8 * i);
    }
    offset_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    std::string_view s = bytes_.substr(offset_, n);
    offset_ += n;
    return s;
  }

 private:
  std::string_view bytes_;
  std::size_t& offset_;
};

// PGM header token, skipping whitespace and '#' comments.
std::string_view next_token(std::string_view bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])) && bytes[pos] != '#') ++pos;
  if (start == pos) format_error("truncated PGM header");
  return bytes.substr(start, pos - start);
}

int parse_positive(std::string_view token, const char* what) {
  int value = 0;
  for (char c : token) {
    if (c < '0' || c > '9') format_error(std::string("non-numeric PGM ") + what);
    value = value * 10 + (c - '0');
    if (value > 1 << 20) format_error(std::string("PGM ") + what + " too large");
  }
  if (value <= 0) format_error(std::string("PGM ") + what + " must be positive");
  return value;
}

}  // namespace

Gray8 parse_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P5") format_error("not a binary PGM (expected P5)");
  Gray8 img;
  img.width = parse_positive(next_token(bytes, pos), "width");
  img.height = parse_positive(next_token(bytes, pos), "height");
  const int maxval = parse_positive(next_token(bytes, pos), "maxval");
  if (maxval > 255) format_error("16-bit PGM is not supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    format_error("missing whitespace after PGM header");
  }
  ++pos;
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  if (bytes.size() - pos < n) format_error("truncated PGM pixel data");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

std::string encode_pgm(const Gray8& image) {
  if (image.height < 1 || image.width < 1 ||
      image.pixels.size() != static_cast<std::size_t>(image.height) * static_cast<std::size_t>(image.width)) {
    throw Error(Errc::DimMismatch, "PGM pixel count does not match its dimensions");
  }
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

BinaryMask mask_from_gray(const Gray8& image) {
  std::vector<std::uint8_t> cells(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), cells.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v >= 128 ? 1 : 0); });
  return BinaryMask(image.height, image.width, std::move(cells));
}

Gray8 mask_to_gray(const BinaryMask& mask) {
  Gray8 img{mask.height(), mask.width(), {}};
  img.pixels.reserve(mask.size());
  for (std::uint8_t c : mask.cells()) img.pixels.push_back(c ? 255 : 0);
  return img;
}

ScalarField image_from_gray(const Gray8& image) {
  std::vector<double> values(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), values.begin(),
                 [](std::uint8_t v) { return v / 255.0; });
  return ScalarField(image.height, image.width, std::move(values));
}

Gray8 image_to_gray(const ScalarField& image) {
  Gray8 img{image.height(), image.width(), {}};
  img.pixels.reserve(image.size());
  for (double v : image.values()) {
    if (!std::isfinite(v)) throw Error(Errc::ValueOutOfRange, "non-finite image value");
    img.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return img;
}

std::string encode_bsdt(const TensorFile& t) {
  if (t.dims.size() > 255) format_error("BSDT supports at most 255 dimensions");
  std::size_t count = 1;
  for (std::uint32_t d : t.dims) count *= d;
  if (count != t.values.size()) {
    throw Error(Errc::ShapeMismatch, "BSDT payload has " + std::to_string(t.values.size()) +
                                         " values, dims give " + std::to_string(count));
  }
  std::string out = "BSDT";
  out.push_back(1);
  out.push_back(static_cast<char>(t.dtype));
  out.push_back(static_cast<char>(t.dims.size()));
  out.push_back(0);
  for (std::uint32_t d : t.dims) put_u32(out, d);
  if (t.dtype == DType::F32) {
    for (double v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  } else if (t.dtype == DType::F64) {
    for (double v : t.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  } else {
    format_error("unknown BSDT dtype");
  }
  return out;
}

TensorFile decode_bsdt(std::string_view bytes, std::size_t& offset) {
  Reader r(bytes, offset);
  if (r.take(4, "BSDT magic") != "BSDT") format_error("bad BSDT magic");
  if (r.u8("BSDT version") != 1) format_error("unsupported BSDT version");
  TensorFile t;
  const std::uint8_t dtype = r.u8("BSDT dtype");
  if (dtype > 1) format_error("unknown BSDT dtype " + std::to_string(dtype));
  t.dtype = static_cast<DType>(dtype);
  const std::uint8_t ndim = r.u8("BSDT ndim");
  if (r.u8("BSDT pad") != 0) format_error("BSDT pad byte must be 0");
  std::uint64_t count = 1;
  for (int i = 0; i < ndim; ++i) {
    t.dims.push_back(static_cast<std::uint32_t>(r.uint(4, "BSDT dims")));
    count *= t.dims.back();
    if (count > (std::uint64_t{1} << 34)) format_error("BSDT tensor too large");
  }
  const int width = t.dtype == DType::F32 ? 4 : 8;
  r.need(count * width, "BSDT payload");
  t.values.resize(count);
  for (auto& v : t.values) {
    const std::uint64_t raw = r.uint(width, "BSDT payload");
    v = width == 4 ? static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(raw)))
                   : std::bit_cast<double>(raw);
  }
  return t;
}

TensorFile decode_bsdt(std::string_view bytes) {
  std::size_t offset = 0;
  TensorFile t = decode_bsdt(bytes, offset);
  if (offset != bytes.size()) format_error("trailing bytes after BSDT tensor");
  return t;
}

std::string encode_bsdc(std::span<const NamedTensorFile> records) {
  std::set<std::string_view> seen;
  std::string out = "BSDC";
  out.push_back(1);
  put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& rec : records) {
    if (rec.name.size() > 0xffff) format_error("tensor name too long: " + rec.name.substr(0, 32));
    if (!seen.insert(rec.name).second) format_error("duplicate tensor name " + rec.name);
    put_u16(out, static_cast<std::uint16_t>(rec.name.size()));
    out += rec.name;
    out += encode_bsdt(rec.tensor);
  }
  return out;
}

std::vector<NamedTensorFile> decode_bsdc(std::string_view bytes) {
  std::size_t offset = 0;
  Reader r(bytes, offset);
  if (r.take(4, "BSDC magic") != "BSDC") format_error("bad BSDC magic");
  if (r.u8("BSDC version") != 1) format_error("unsupported BSDC version");
  const auto count = static_cast<std::uint32_t>(r.uint(4, "BSDC count"));
  std::vector<NamedTensorFile> records;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = static_cast<std::size_t>(r.uint(2, "BSDC name length"));
    NamedTensorFile rec;
    rec.name = std::string(r.take(len, "BSDC name"));
    if (!seen.insert(rec.name).second) format_error("duplicate tensor name " + rec.name);
    rec.tensor = decode_bsdt(bytes, offset);
    records.push_back(std::move(rec));
  }
  if (offset != bytes.size()) format_error("trailing bytes after BSDC records");
  return records;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(Errc::IoError, "read failed for " + path.string());
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

BinaryMask read_mask(const std::filesystem::path& path) {
  try {
    return mask_from_gray(parse_pgm(read_file(path)));
  } catch (const Error& e) {
    if (e.code() == Errc::IoError) throw;
    throw Error(Errc::InvalidMask, path.string() + ": " + e.what());
  }
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  write_file(path, encode_pgm(mask_to_gray(mask)));
}

ScalarField read_image(const std::filesystem::path& path) {
  try {
    return image_from_gray(parse_pgm(read_file(path)));
  } catch (const Error& e) {
    if (e.code() != Errc::FormatError) throw;
    throw Error(Errc::FormatError, path.string() + ": " + e.what());
  }
}

void write_image(const std::filesystem::path& path, const ScalarField& image) {
  write_file(path, encode_pgm(image_to_gray(image)));
}

TensorFile field_to_tensor(const ScalarField& field) {
  TensorFile t;
  t.dtype = DType::F64;
  t.dims = {static_cast<std::uint32_t>(field.height()), static_cast<std::uint32_t>(field.width())};
  t.values.assign(field.values().begin(), field.values().end());
  return t;
}

void write_field(const std::filesystem::path& path, const ScalarField& field) {
  write_file(path, encode_bsdt(field_to_tensor(field)));
}

ScalarField read_field(const std::filesystem::path& path, FieldKind kind) {
  TensorFile t = decode_bsdt(read_file(path));
  if (t.dims.size() != 2 || t.dims[0] == 0 || t.dims[1] == 0) {
    format_error(path.string() + ": expected a non-empty 2-D tensor");
  }
  return ScalarField(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), std::move(t.values), kind);
}

void save_checkpoint(const std::filesystem::path& path, BsdaModel& model) {
  std::vector<NamedTensorFile> records;
  for (const NamedTensor& nt : model.state()) {
    TensorFile t;
    t.dtype = DType::F64;
    for (int d : nt.tensor->shape()) t.dims.push_back(static_cast<std::uint32_t>(d));
    t.values.assign(nt.tensor->values().begin(), nt.tensor->values().end());
    records.push_back({nt.name, std::move(t)});
  }
  write_file(path, encode_bsdc(records));
}

void load_checkpoint(const std::filesystem::path& path, BsdaModel& model) {
  std::vector<NamedTensorFile> records;
  try {
    records = decode_bsdc(read_file(path));
  } catch (const Error& e) {
    if (e.code() != Errc::FormatError) throw;
    throw Error(Errc::FormatError, path.string() + ": " + e.what());
  }
  auto state = model.state();
  if (records.size() != state.size()) {
    throw Error(Errc::ShapeMismatch, "checkpoint holds " + std::to_string(records.size()) +
                                         " tensors, model expects " + std::to_string(state.size()));
  }
  std::vector<std::vector<double>> staged;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto it = std::find_if(records.begin(), records.end(),
                                 [&](const NamedTensorFile& r) { return r.name == state[i].name; });
    if (it == records.end()) throw Error(Errc::ShapeMismatch, "checkpoint lacks tensor " + state[i].name);
    ad::Shape dims(it->tensor.dims.begin(), it->tensor.dims.end());
    if (dims != state[i].tensor->shape()) {
      throw Error(Errc::ShapeMismatch, state[i].name + ": checkpoint shape " + ad::to_string(dims) +
                                           ", model shape " + ad::to_string(state[i].tensor->shape()));
    }
    staged.push_back(it->tensor.values);
  }
  // Assign only once everything matched so a failed load leaves the model intact.
  for (std::size_t i = 0; i < state.size(); ++i) *state[i].tensor = ad::Tensor(state[i].tensor->shape(), staged[i]);
}

}  // namespace bsda::io
