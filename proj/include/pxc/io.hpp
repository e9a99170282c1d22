#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pxc/network.hpp"
#include "pxc/scene.hpp"

namespace pxc::io {

// Image: binary PPM (P6, 8-bit), values quantized by round(v * 255).
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

// Instance map: 16-bit binary PGM (P5, big-endian samples, maxval 65535).
void write_pgm16(const std::string& path, const InstanceLabelMap& m);
InstanceLabelMap read_pgm16(const std::string& path);

// Semantic map: 8-bit binary PGM (P5).
void write_pgm8(const std::string& path, const SemanticLabelMap& m);
SemanticLabelMap read_pgm8(const std::string& path);

// Center offsets: 16-byte header (magic "CTR1", height, width, reserved zero,
// all 32-bit LE) followed by float32 LE (dx, dy) per pixel.
void write_centers(const std::string& path, const CenterOffsetMap& m);
CenterOffsetMap read_centers(const std::string& path);

struct ScenePaths {
  std::string image, instances, semantics, centers;
};
ScenePaths scene_paths(const std::string& dir, int index);
void save_scene(const std::string& dir, int index, const Scene& scene);
Scene load_scene(const std::string& dir, int index);

// Checkpoint: magic "PXC1", u32 version, u32 tensor count, then per tensor
// (name order): u32 name length, UTF-8 name, u32 rank, u32 dims, f64 LE data.
void save_checkpoint(const std::string& path, const ParameterStore& params);
ParameterStore load_checkpoint(const std::string& path);

// Row-major run-length encoding of a sorted pixel-index mask: start,len,...
std::vector<int64_t> rle_encode(const std::vector<int>& sorted_pixels);
std::vector<int> rle_decode(const std::vector<int64_t>& rle);

bool files_identical(const std::string& a, const std::string& b);

}  // namespace pxc::io
