#include "pitsep/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace pitsep::wav {

namespace {

uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(x & 0xff);
  v.push_back((x >> 8) & 0xff);
  v.push_back((x >> 16) & 0xff);
  v.push_back((x >> 24) & 0xff);
}

void put_u16(std::vector<uint8_t>& v, uint16_t x) {
  v.push_back(x & 0xff);
  v.push_back((x >> 8) & 0xff);
}

void put_tag(std::vector<uint8_t>& v, const char* tag) {
  v.insert(v.end(), tag, tag + 4);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_wav: cannot open " + path);
  std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());

  if (data.size() < 12) throw TruncatedFileError("read_wav: file too short for RIFF header: " + path);
  if (std::memcmp(data.data(), "RIFF", 4) != 0 || std::memcmp(data.data() + 8, "WAVE", 4) != 0)
    throw UnsupportedEncodingError("read_wav: not a RIFF/WAVE file: " + path);

  // Chunk scan for fmt and data.
  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  const uint8_t* pcm = nullptr;
  uint32_t pcm_bytes = 0;

  size_t pos = 12;
  while (pos + 8 <= data.size()) {
    const uint8_t* hdr = data.data() + pos;
    uint32_t chunk_size = read_u32(hdr + 4);
    size_t body = pos + 8;
    if (body + chunk_size > data.size())
      throw TruncatedFileError("read_wav: chunk extends past end of file: " + path);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw TruncatedFileError("read_wav: fmt chunk too short: " + path);
      format = read_u16(data.data() + body);
      channels = read_u16(data.data() + body + 2);
      sample_rate = read_u32(data.data() + body + 4);
      bits = read_u16(data.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      pcm = data.data() + body;
      pcm_bytes = chunk_size;
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_fmt || pcm == nullptr)
    throw TruncatedFileError("read_wav: missing fmt or data chunk: " + path);
  if (format != 1 || bits != 16)
    throw UnsupportedEncodingError("read_wav: only 16-bit PCM supported: " + path);
  if (channels != 1)
    throw ChannelCountError("read_wav: expected mono, got " + std::to_string(channels) +
                            " channels: " + path);
  if (pcm_bytes % 2 != 0)
    throw TruncatedFileError("read_wav: odd PCM byte count: " + path);

  Waveform out;
  out.sample_rate = static_cast<int>(sample_rate);
  size_t n = pcm_bytes / 2;
  out.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    int16_t s = static_cast<int16_t>(read_u16(pcm + 2 * i));
    out.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return out;
}

void write_wav(const std::string& path, const Waveform& wave) {
  if (wave.sample_rate <= 0) throw InvalidArgument("write_wav: invalid sample rate");

  const uint32_t n = static_cast<uint32_t>(wave.samples.size());
  std::vector<uint8_t> out;
  out.reserve(44 + 2 * n);

  put_tag(out, "RIFF");
  put_u32(out, 36 + 2 * n);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<uint32_t>(wave.sample_rate));
  put_u32(out, static_cast<uint32_t>(wave.sample_rate) * 2);  // byte rate
  put_u16(out, 2);                                            // block align
  put_u16(out, 16);                                           // bits
  put_tag(out, "data");
  put_u32(out, 2 * n);

  for (double x : wave.samples) {
    double c = std::clamp(x, -1.0, 1.0);
    int v = static_cast<int>(std::lround(c * 32768.0));
    v = std::clamp(v, -32768, 32767);
    put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(v)));
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("write_wav: cannot open " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("write_wav: write failed: " + path);
}

}  // namespace pitsep::wav
