#include "omm/error.hpp"

namespace omm {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NaNInRetainedColumn: return "NaNInRetainedColumn";
    case ErrorCode::NonUniformTimestamps: return "NonUniformTimestamps";
    case ErrorCode::UnknownChannel: return "UnknownChannel";
    case ErrorCode::AllSentinel: return "AllSentinel";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::ConstantChannel: return "ConstantChannel";
    case ErrorCode::ConstantActual: return "ConstantActual";
    case ErrorCode::TooFewExperiments: return "TooFewExperiments";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnsupportedWord: return "UnsupportedWord";
    case ErrorCode::MalformedNumber: return "MalformedNumber";
    case ErrorCode::ZeroFeedMove: return "ZeroFeedMove";
    case ErrorCode::InsufficientPulseLengthDiversity: return "InsufficientPulseLengthDiversity";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::InsufficientPairs: return "InsufficientPairs";
    case ErrorCode::EmptySurvivorSet: return "EmptySurvivorSet";
  }
  return "Unknown";
}

}  // namespace omm
