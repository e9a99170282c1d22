#include "pxc/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pxc/error.hpp"

namespace pxc::io {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  return f;
}

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("truncated file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

float get_f32(std::istream& is) {
  const uint32_t bits = get_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void put_f64(std::ostream& os, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u32(os, static_cast<uint32_t>(bits));
  put_u32(os, static_cast<uint32_t>(bits >> 32));
}

double get_f64(std::istream& is) {
  const uint64_t lo = get_u32(is);
  const uint64_t hi = get_u32(is);
  const uint64_t bits = lo | (hi << 32);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

// Reads one whitespace-delimited PNM header token, skipping '#' comments.
std::string pnm_token(std::istream& is) {
  std::string tok;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw IoError("truncated PNM header");
  return tok;
}

}  // namespace

void write_ppm(const std::string& path, const Image& img) {
  auto f = open_out(path);
  f << "P6\n" << img.w << " " << img.h << "\n255\n";
  std::vector<unsigned char> bytes(img.rgb.size());
  for (size_t i = 0; i < img.rgb.size(); ++i) {
    const double q = std::lround(std::min(1.0, std::max(0.0, img.rgb[i])) * 255.0);
    bytes[i] = static_cast<unsigned char>(q);
  }
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image read_ppm(const std::string& path) {
  auto f = open_in(path);
  if (pnm_token(f) != "P6") throw IoError(path + ": not a binary PPM");
  const int w = std::stoi(pnm_token(f));
  const int h = std::stoi(pnm_token(f));
  const int maxval = std::stoi(pnm_token(f));
  if (maxval != 255) throw IoError(path + ": unsupported maxval");
  std::vector<unsigned char> bytes(static_cast<size_t>(h) * w * 3);
  f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError(path + ": truncated pixel data");
  Image img{h, w, std::vector<double>(bytes.size())};
  for (size_t i = 0; i < bytes.size(); ++i) img.rgb[i] = bytes[i] / 255.0;
  return img;
}

void write_pgm16(const std::string& path, const InstanceLabelMap& m) {
  auto f = open_out(path);
  f << "P5\n" << m.w << " " << m.h << "\n65535\n";
  std::vector<unsigned char> bytes(m.id.size() * 2);
  for (size_t i = 0; i < m.id.size(); ++i) {
    const int v = m.id[i];
    if (v < 0 || v > 65535) throw IoError("instance id out of 16-bit range");
    bytes[2 * i] = static_cast<unsigned char>(v >> 8);  // PGM samples are big-endian
    bytes[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
  }
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

InstanceLabelMap read_pgm16(const std::string& path) {
  auto f = open_in(path);
  if (pnm_token(f) != "P5") throw IoError(path + ": not a binary PGM");
  const int w = std::stoi(pnm_token(f));
  const int h = std::stoi(pnm_token(f));
  if (std::stoi(pnm_token(f)) != 65535) throw IoError(path + ": expected 16-bit PGM");
  std::vector<unsigned char> bytes(static_cast<size_t>(h) * w * 2);
  f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError(path + ": truncated pixel data");
  InstanceLabelMap m{h, w, std::vector<int>(static_cast<size_t>(h) * w)};
  for (size_t i = 0; i < m.id.size(); ++i)
    m.id[i] = (static_cast<int>(bytes[2 * i]) << 8) | bytes[2 * i + 1];
  return m;
}

void write_pgm8(const std::string& path, const SemanticLabelMap& m) {
  auto f = open_out(path);
  f << "P5\n" << m.w << " " << m.h << "\n255\n";
  std::vector<unsigned char> bytes(m.label.size());
  for (size_t i = 0; i < m.label.size(); ++i) {
    if (m.label[i] < 0 || m.label[i] > 255) throw IoError("semantic label out of 8-bit range");
    bytes[i] = static_cast<unsigned char>(m.label[i]);
  }
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

SemanticLabelMap read_pgm8(const std::string& path) {
  auto f = open_in(path);
  if (pnm_token(f) != "P5") throw IoError(path + ": not a binary PGM");
  const int w = std::stoi(pnm_token(f));
  const int h = std::stoi(pnm_token(f));
  if (std::stoi(pnm_token(f)) != 255) throw IoError(path + ": expected 8-bit PGM");
  std::vector<unsigned char> bytes(static_cast<size_t>(h) * w);
  f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError(path + ": truncated pixel data");
  SemanticLabelMap m{h, w, std::vector<int>(bytes.begin(), bytes.end())};
  return m;
}

void write_centers(const std::string& path, const CenterOffsetMap& m) {
  auto f = open_out(path);
  f.write("CTR1", 4);
  put_u32(f, static_cast<uint32_t>(m.h));
  put_u32(f, static_cast<uint32_t>(m.w));
  put_u32(f, 0);  // reserved
  for (double v : m.v) put_f32(f, static_cast<float>(v));
}

CenterOffsetMap read_centers(const std::string& path) {
  auto f = open_in(path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "CTR1", 4) != 0) throw IoError(path + ": bad center-map magic");
  const int h = static_cast<int>(get_u32(f));
  const int w = static_cast<int>(get_u32(f));
  get_u32(f);  // reserved
  CenterOffsetMap m{h, w, std::vector<double>(static_cast<size_t>(h) * w * 2)};
  for (double& v : m.v) v = get_f32(f);
  return m;
}

ScenePaths scene_paths(const std::string& dir, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%06d", index);
  const std::string stem = dir + "/" + buf;
  return {stem + ".ppm", stem + "_inst.pgm", stem + "_sem.pgm", stem + "_ctr.bin"};
}

void save_scene(const std::string& dir, int index, const Scene& scene) {
  const ScenePaths p = scene_paths(dir, index);
  write_ppm(p.image, scene.image);
  write_pgm16(p.instances, scene.instances);
  write_pgm8(p.semantics, scene.semantics);
  write_centers(p.centers, scene.centers);
}

Scene load_scene(const std::string& dir, int index) {
  const ScenePaths p = scene_paths(dir, index);
  Scene s;
  s.image = read_ppm(p.image);
  s.instances = read_pgm16(p.instances);
  s.semantics = read_pgm8(p.semantics);
  s.centers = read_centers(p.centers);
  return s;
}

void save_checkpoint(const std::string& path, const ParameterStore& params) {
  auto f = open_out(path);
  f.write("PXC1", 4);
  put_u32(f, 1);
  put_u32(f, static_cast<uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    put_u32(f, static_cast<uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(f, static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(f, static_cast<uint32_t>(d));
    for (double v : t.v) put_f64(f, v);
  }
}

ParameterStore load_checkpoint(const std::string& path) {
  auto f = open_in(path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "PXC1", 4) != 0) throw IoError(path + ": bad checkpoint magic");
  const uint32_t version = get_u32(f);
  if (version != 1) throw IoError(path + ": unsupported checkpoint version");
  const uint32_t count = get_u32(f);
  ParameterStore params;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = get_u32(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const uint32_t rank = get_u32(f);
    Tensor t;
    t.shape.resize(rank);
    for (uint32_t d = 0; d < rank; ++d) t.shape[d] = static_cast<int>(get_u32(f));
    t.v.resize(static_cast<size_t>(t.size()));
    for (double& v : t.v) v = get_f64(f);
    if (!f) throw IoError(path + ": truncated checkpoint");
    params[name] = std::move(t);
  }
  return params;
}

std::vector<int64_t> rle_encode(const std::vector<int>& sorted_pixels) {
  std::vector<int64_t> rle;
  size_t i = 0;
  while (i < sorted_pixels.size()) {
    size_t j = i + 1;
    while (j < sorted_pixels.size() && sorted_pixels[j] == sorted_pixels[j - 1] + 1) ++j;
    rle.push_back(sorted_pixels[i]);
    rle.push_back(static_cast<int64_t>(j - i));
    i = j;
  }
  return rle;
}

std::vector<int> rle_decode(const std::vector<int64_t>& rle) {
  std::vector<int> out;
  for (size_t i = 0; i + 1 < rle.size(); i += 2)
    for (int64_t k = 0; k < rle[i + 1]; ++k) out.push_back(static_cast<int>(rle[i] + k));
  return out;
}

bool files_identical(const std::string& a, const std::string& b) {
  auto fa = open_in(a);
  auto fb = open_in(b);
  std::ostringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  return sa.str() == sb.str();
}

}  // namespace pxc::io
