#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bsda/field.hpp"
#include "bsda/mask.hpp"

namespace bsda {

enum class Split { Train, Val, Test };

std::string_view split_name(Split s) noexcept;
/// Throws FormatError for an unknown name.
Split parse_split(std::string_view name);

struct Sample {
  std::string id;
  ScalarField image;
  BinaryMask mask;
  int label = 0;
  Split split = Split::Train;
};

/// Reads manifest.csv (`id,class,split`) and the matching images/ and masks/
/// PGMs. Throws DataEmpty when the manifest lists no samples.
std::vector<Sample> load_dataset(const std::filesystem::path& dir);

std::vector<const Sample*> select_split(std::span<const Sample> samples, Split split);

}  // namespace bsda
