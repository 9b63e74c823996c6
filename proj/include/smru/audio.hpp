// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "smru/errors.hpp"

namespace smru {

inline constexpr int kSampleRate = 16000;

// Mono float audio, nominal range [-1, 1].
struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

namespace detail {

inline void put_u32(std::string& s, uint32_t v) {
  s.push_back(static_cast<char>(v & 0xFF));
  s.push_back(static_cast<char>((v >> 8) & 0xFF));
  s.push_back(static_cast<char>((v >> 16) & 0xFF));
  s.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline void put_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xFF));
  s.push_back(static_cast<char>((v >> 8) & 0xFF));
}

inline uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline uint16_t get_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

// PCM16 quantization rule: round half away from zero, clamp to int16 range.
inline int16_t quantize_pcm16(float x) {
  const long v = std::lround(static_cast<double>(x) * 32768.0);
  if (v > 32767) return 32767;
  if (v < -32768) return -32768;
  return static_cast<int16_t>(v);
}

// Writes RIFF/WAVE, PCM16 mono 16 kHz.
inline void write_wav(const std::string& path, const AudioBuffer& buf) {
  if (buf.sample_rate != kSampleRate)
    throw FormatError("write_wav: sample rate must be 16000 Hz");
  std::string out;
  const uint32_t data_bytes = static_cast<uint32_t>(buf.samples.size() * 2);
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, kSampleRate);
  detail::put_u32(out, kSampleRate * 2);  // byte rate
  detail::put_u16(out, 2);                // block align
  detail::put_u16(out, 16);               // bits
  out += "data";
  detail::put_u32(out, data_bytes);
  for (float s : buf.samples) {
    const int16_t q = quantize_pcm16(s);
    out.push_back(static_cast<char>(q & 0xFF));
    out.push_back(static_cast<char>((q >> 8) & 0xFF));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("write_wav: cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("write_wav: write failed for '" + path + "'");
}

// Reads RIFF/WAVE and requires PCM16 mono 16 kHz; anything else is rejected.
inline AudioBuffer read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("read_wav: cannot open '" + path + "'");
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (raw.size() < 12) throw FormatError("read_wav: '" + path + "' is not a WAV file");
  if (std::memcmp(raw.data(), "RIFF", 4) != 0 || std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
    throw FormatError("read_wav: '" + path + "' missing RIFF/WAVE header");

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const unsigned char* data = nullptr;
  uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const char* id = reinterpret_cast<const char*>(raw.data() + pos);
    const uint32_t len = detail::get_u32(raw.data() + pos + 4);
    pos += 8;
    if (pos + len > raw.size())
      throw FormatError("read_wav: truncated chunk in '" + path + "'");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw FormatError("read_wav: fmt chunk too short");
      format = detail::get_u16(raw.data() + pos);
      channels = detail::get_u16(raw.data() + pos + 2);
      rate = detail::get_u32(raw.data() + pos + 4);
      bits = detail::get_u16(raw.data() + pos + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = raw.data() + pos;
      data_len = len;
    }
    pos += len + (len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr)
    throw FormatError("read_wav: '" + path + "' missing fmt/data chunk");
  if (format != 1) throw FormatError("read_wav: only PCM supported");
  if (channels != 1)
    throw FormatError("read_wav: expected mono, got " + std::to_string(channels) +
                      " channels");
  if (rate != kSampleRate)
    throw FormatError("read_wav: expected 16000 Hz, got " + std::to_string(rate));
  if (bits != 16) throw FormatError("read_wav: expected 16-bit PCM, got " +
                                    std::to_string(bits));

  AudioBuffer buf;
  buf.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < buf.samples.size(); ++i) {
    const int16_t q = static_cast<int16_t>(detail::get_u16(data + 2 * i));
    buf.samples[i] = static_cast<float>(q) / 32768.0f;
  }
  return buf;
}

}  // namespace smru
