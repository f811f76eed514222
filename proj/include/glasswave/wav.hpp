// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal RIFF/WAVE reader and writer. Writes IEEE float-32; reads PCM
// 16/24/32-bit and float 32/64.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glasswave/core.hpp"

namespace glasswave {

/// Channels x samples.
struct WavData {
  Eigen::MatrixXd samples;
  double sample_rate_hz = 16000.0;
};

namespace detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u16(std::ofstream& out, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

inline void write_wav(const std::filesystem::path& path, const Eigen::MatrixXd& samples, double sample_rate_hz) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "wav", "cannot write " + path.string());
  const auto channels = static_cast<std::uint16_t>(samples.rows());
  const auto frames = static_cast<std::uint32_t>(samples.cols());
  const std::uint32_t data_bytes = frames * channels * 4u;
  const auto rate = static_cast<std::uint32_t>(sample_rate_hz);
  out.write("RIFF", 4);
  detail::put_u32(out, 36u + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  detail::put_u32(out, 16);
  detail::put_u16(out, 3);  // WAVE_FORMAT_IEEE_FLOAT
  detail::put_u16(out, channels);
  detail::put_u32(out, rate);
  detail::put_u32(out, rate * channels * 4u);
  detail::put_u16(out, static_cast<std::uint16_t>(channels * 4u));
  detail::put_u16(out, 32);
  out.write("data", 4);
  detail::put_u32(out, data_bytes);
  std::vector<float> interleaved(static_cast<std::size_t>(frames) * channels);
  for (std::uint32_t t = 0; t < frames; ++t) {
    for (std::uint16_t c = 0; c < channels; ++c) {
      interleaved[static_cast<std::size_t>(t) * channels + c] = static_cast<float>(samples(c, t));
    }
  }
  out.write(reinterpret_cast<const char*>(interleaved.data()),
            static_cast<std::streamsize>(interleaved.size() * sizeof(float)));
  if (!out) throw Error(ErrorKind::io, "wav", "short write to " + path.string());
}

inline void write_wav(const std::filesystem::path& path, const Eigen::VectorXd& mono, double sample_rate_hz) {
  write_wav(path, Eigen::MatrixXd(mono.transpose()), sample_rate_hz);
}

inline WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "wav", "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) { return Error(ErrorKind::invalid_input, "wav", path.string() + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = detail::get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size() && std::memcmp(chunk, "data", 4) != 0) throw fail("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw fail("short fmt chunk");
      format = detail::get_u16(bytes.data() + body);
      channels = detail::get_u16(bytes.data() + body + 2);
      rate = detail::get_u32(bytes.data() + body + 4);
      bits = detail::get_u16(bytes.data() + body + 14);
      if (format == 0xFFFE && size >= 26) format = detail::get_u16(bytes.data() + body + 24);  // extensible
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = std::min<std::size_t>(size, bytes.size() - body);
    }
    pos = body + size + (size & 1u);
  }
  if (channels == 0 || data == nullptr) throw fail("missing fmt or data chunk");
  const std::size_t width = bits / 8;
  if (width == 0) throw fail("invalid sample width");
  const std::size_t frames = data_size / (width * channels);
  WavData wav{Eigen::MatrixXd(channels, static_cast<Eigen::Index>(frames)), static_cast<double>(rate)};
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (t * channels + c) * width;
      double v = 0.0;
      if (format == 3 && bits == 32) {
        float f;
        std::memcpy(&f, p, 4);
        v = f;
      } else if (format == 3 && bits == 64) {
        double d;
        std::memcpy(&d, p, 8);
        v = d;
      } else if (format == 1 && bits == 16) {
        v = static_cast<std::int16_t>(detail::get_u16(p)) / 32768.0;
      } else if (format == 1 && bits == 24) {
        std::int32_t s = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
        if (s & 0x800000) s -= 0x1000000;
        v = s / 8388608.0;
      } else if (format == 1 && bits == 32) {
        v = static_cast<std::int32_t>(detail::get_u32(p)) / 2147483648.0;
      } else {
        throw fail("unsupported sample format " + std::to_string(format) + "/" + std::to_string(bits) + " bit");
      }
      wav.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = v;
    }
  }
  return wav;
}

}  // namespace glasswave
