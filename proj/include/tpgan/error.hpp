#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tpgan {

enum class Errc {
  InvalidArgument,
  Config,
  ShapeMismatch,
  InsufficientData,
  BatchTooLarge,
  ImbalancedAssembly,
  DegenerateLabelSpace,
  NonFiniteGradient,
  NonFiniteLoss,
  DivergedTraining,
  TooFewPoints,
  DegenerateFeatures,
  CorruptCheckpoint,
  Io,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

/// Process exit code for a failure class: 2 validation, 3 data, 4 training.
int exit_code_for(Errc code);

}  // namespace tpgan
