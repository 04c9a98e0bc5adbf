#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bsda {

enum class Errc {
  InvalidMask,
  EmptyFeatureSet,
  EmptyForeground,
  InvalidSigma,
  DimMismatch,
  ValueOutOfRange,
  EmptyList,
  EmptyMatrix,
  DegenerateKappa,
  ShapeMismatch,
  BatchTooSmall,
  LabelOutOfRange,
  NonFinite,
  ConfigInvalid,
  DataEmpty,
  ResolutionMismatch,
  DegenerateShape,
  IoError,
  FormatError,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace bsda
