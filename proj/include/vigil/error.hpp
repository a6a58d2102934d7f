#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vigil {

// Every failure the library reports carries one of these codes so callers
// (and the HTTP layer) can branch without parsing messages.
enum class Errc {
  BadMagic,
  TruncatedPayload,
  MaxvalNot255,
  ZeroDimension,
  RectOutOfBounds,
  BadWindow,
  GeometryMismatch,
  EmptyInput,
  KTooLarge,
  EmptyCrop,
  BadAlpha,
  BadResolution,
  ShapeMismatch,
  WeightMismatch,
  BadInputSize,
  BadK,
  EmptySet,
  FingerprintMismatch,
  Corrupt,
  NoPlateFound,
  DegenerateQuad,
  NoGlyphs,
  EmptyCounts,
  EmptyRows,
  ManifestMissing,
  CorpusEmpty,
  DuplicateId,
  NoAttributes,
  UnknownEntry,
  SourceError,
  ConfigError,
  NoSamples,
  BindError,
  IoError,
  InvalidRecord,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::MaxvalNot255: return "MaxvalNot255";
    case Errc::ZeroDimension: return "ZeroDimension";
    case Errc::RectOutOfBounds: return "RectOutOfBounds";
    case Errc::BadWindow: return "BadWindow";
    case Errc::GeometryMismatch: return "GeometryMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::EmptyCrop: return "EmptyCrop";
    case Errc::BadAlpha: return "BadAlpha";
    case Errc::BadResolution: return "BadResolution";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::WeightMismatch: return "WeightMismatch";
    case Errc::BadInputSize: return "BadInputSize";
    case Errc::BadK: return "BadK";
    case Errc::EmptySet: return "EmptySet";
    case Errc::FingerprintMismatch: return "FingerprintMismatch";
    case Errc::Corrupt: return "Corrupt";
    case Errc::NoPlateFound: return "NoPlateFound";
    case Errc::DegenerateQuad: return "DegenerateQuad";
    case Errc::NoGlyphs: return "NoGlyphs";
    case Errc::EmptyCounts: return "EmptyCounts";
    case Errc::EmptyRows: return "EmptyRows";
    case Errc::ManifestMissing: return "ManifestMissing";
    case Errc::CorpusEmpty: return "CorpusEmpty";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::NoAttributes: return "NoAttributes";
    case Errc::UnknownEntry: return "UnknownEntry";
    case Errc::SourceError: return "SourceError";
    case Errc::ConfigError: return "ConfigError";
    case Errc::NoSamples: return "NoSamples";
    case Errc::BindError: return "BindError";
    case Errc::IoError: return "IoError";
    case Errc::InvalidRecord: return "InvalidRecord";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace vigil
