#include "csk/error.hpp"

namespace csk {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroTristimulus: return "ZeroTristimulus";
    case ErrorCode::DegenerateTriangle: return "DegenerateTriangle";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::OutOfGamut: return "OutOfGamut";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::SyncNotFound: return "SyncNotFound";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::AnchorUnderflow: return "AnchorUnderflow";
    case ErrorCode::Underdetermined: return "Underdetermined";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyResults: return "EmptyResults";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace csk
