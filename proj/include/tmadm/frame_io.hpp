#pragma once

// Binary frame container used to hand received frames between the CLI
// subcommands. Layout, all little-endian:
//
//   bytes 0..3   magic "TMAF"
//   bytes 4..7   u32 version (currently 1)
//   bytes 8..11  u32 K       (subcarriers per frame)
//   bytes 12..19 u64 H       (number of frames)
//   then H*K complex samples, frame-major, each as two IEEE-754 doubles
//   (real then imaginary).

#include "tmadm/types.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace tmadm {

static_assert(std::endian::native == std::endian::little,
              "frame container assumes a little-endian host");

inline constexpr char kFrameMagic[4] = {'T', 'M', 'A', 'F'};
inline constexpr std::uint32_t kFrameVersion = 1;

// Frames are stored column-per-frame in memory (K x H); on disk they are
// frame-major, i.e. column after column.
inline void write_frames(const std::string& path, const CMat& frames) {
  if (frames.rows() == 0 || frames.cols() == 0)
    throw std::invalid_argument("refusing to write an empty frame container");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const auto K = static_cast<std::uint32_t>(frames.rows());
  const auto H = static_cast<std::uint64_t>(frames.cols());
  out.write(kFrameMagic, 4);
  out.write(reinterpret_cast<const char*>(&kFrameVersion), 4);
  out.write(reinterpret_cast<const char*>(&K), 4);
  out.write(reinterpret_cast<const char*>(&H), 8);
  for (std::uint64_t t = 0; t < H; ++t)
    for (std::uint32_t l = 0; l < K; ++l) {
      const cxd z = frames(static_cast<Eigen::Index>(l),
                           static_cast<Eigen::Index>(t));
      const double re = z.real(), im = z.imag();
      out.write(reinterpret_cast<const char*>(&re), 8);
      out.write(reinterpret_cast<const char*>(&im), 8);
    }
  if (!out) throw std::runtime_error("short write: " + path);
}

inline CMat read_frames(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  char magic[4];
  std::uint32_t version = 0, K = 0;
  std::uint64_t H = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&K), 4);
  in.read(reinterpret_cast<char*>(&H), 8);
  if (!in || std::memcmp(magic, kFrameMagic, 4) != 0)
    throw std::runtime_error("not a frame container: " + path);
  if (version != kFrameVersion)
    throw std::runtime_error("unsupported frame container version " +
                             std::to_string(version));
  if (K == 0 || H == 0)
    throw std::runtime_error("empty frame container: " + path);
  CMat frames(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(H));
  for (std::uint64_t t = 0; t < H; ++t)
    for (std::uint32_t l = 0; l < K; ++l) {
      double re = 0.0, im = 0.0;
      in.read(reinterpret_cast<char*>(&re), 8);
      in.read(reinterpret_cast<char*>(&im), 8);
      frames(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t)) =
          cxd(re, im);
    }
  if (!in) throw std::runtime_error("truncated frame container: " + path);
  return frames;
}

}  // namespace tmadm
