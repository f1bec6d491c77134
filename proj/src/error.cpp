#include "tpgan/error.hpp"

namespace tpgan {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Config: return "Config";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::BatchTooLarge: return "BatchTooLarge";
    case Errc::ImbalancedAssembly: return "ImbalancedAssembly";
    case Errc::DegenerateLabelSpace: return "DegenerateLabelSpace";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::DivergedTraining: return "DivergedTraining";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::DegenerateFeatures: return "DegenerateFeatures";
    case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::InvalidArgument:
    case Errc::Config:
    case Errc::ShapeMismatch:
    case Errc::DegenerateLabelSpace:
      return 2;
    case Errc::InsufficientData:
    case Errc::BatchTooLarge:
    case Errc::ImbalancedAssembly:
    case Errc::TooFewPoints:
    case Errc::DegenerateFeatures:
    case Errc::CorruptCheckpoint:
    case Errc::Io:
      return 3;
    case Errc::NonFiniteGradient:
    case Errc::NonFiniteLoss:
    case Errc::DivergedTraining:
      return 4;
  }
  return 1;
}

}  // namespace tpgan
