#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bsda/field.hpp"
#include "bsda/mask.hpp"

namespace bsda {

class BsdaModel;

namespace io {

/// 8-bit greyscale raster as stored in a binary PGM (P5) file.
struct Gray8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  bool operator==(const Gray8&) const = default;
};

/// Throws FormatError on malformed input. Accepts comments and any maxval up
/// to 255; pixel values are kept as stored.
Gray8 parse_pgm(std::string_view bytes);
/// Canonical form: "P5\n<w> <h>\n255\n" followed by the pixels.
std::string encode_pgm(const Gray8& image);

/// Values >= 128 are foreground.
BinaryMask mask_from_gray(const Gray8& image);
/// Foreground 255, background 0.
Gray8 mask_to_gray(const BinaryMask& mask);
/// Pixel value / 255.
ScalarField image_from_gray(const Gray8& image);
/// round(255 * clamp(v, 0, 1)).
Gray8 image_to_gray(const ScalarField& image);

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

/// Contents of a BSDT file. Values are held as doubles; with DType::F32 they
/// are narrowed on encode.
struct TensorFile {
  DType dtype = DType::F64;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;

  bool operator==(const TensorFile&) const = default;
};

std::string encode_bsdt(const TensorFile& tensor);
/// Reads one tensor starting at `offset` and advances it past the payload.
TensorFile decode_bsdt(std::string_view bytes, std::size_t& offset);
TensorFile decode_bsdt(std::string_view bytes);

struct NamedTensorFile {
  std::string name;
  TensorFile tensor;

  bool operator==(const NamedTensorFile&) const = default;
};

/// Throws FormatError on duplicate or oversized names.
std::string encode_bsdc(std::span<const NamedTensorFile> records);
std::vector<NamedTensorFile> decode_bsdc(std::string_view bytes);

/// Whole-file helpers; IoError names the path on failure.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

BinaryMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
ScalarField read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const ScalarField& image);

TensorFile field_to_tensor(const ScalarField& field);
void write_field(const std::filesystem::path& path, const ScalarField& field);
ScalarField read_field(const std::filesystem::path& path, FieldKind kind = FieldKind::Other);

/// Parameters and batch-norm statistics, 64-bit.
void save_checkpoint(const std::filesystem::path& path, BsdaModel& model);
/// Throws ShapeMismatch when the stored names or shapes differ from the model.
void load_checkpoint(const std::filesystem::path& path, BsdaModel& model);

}  // namespace io
}  // namespace bsda
