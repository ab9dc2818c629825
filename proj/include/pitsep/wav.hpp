#pragma once

#include <string>

#include "pitsep/dsp.hpp"

namespace pitsep::wav {

// WAV errors are DataError subclasses so the CLI can map them to exit code 2.
class UnsupportedEncodingError : public DataError {
 public:
  using DataError::DataError;
};
class ChannelCountError : public DataError {
 public:
  using DataError::DataError;
};
class TruncatedFileError : public DataError {
 public:
  using DataError::DataError;
};

// Reads a RIFF PCM 16-bit little-endian mono file.
Waveform read_wav(const std::string& path);

// Writes 16-bit PCM mono; samples are clamped to [-1, 1] and quantized.
void write_wav(const std::string& path, const Waveform& wave);

}  // namespace pitsep::wav
