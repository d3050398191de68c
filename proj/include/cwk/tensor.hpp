#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cwk {

// Dense (channels, height, width) float tensor, row-major within each channel.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w),
        data(static_cast<size_t>(c) * h * w, fill) {
    if (c < 1 || h < 1 || w < 1)
      throw std::invalid_argument("Tensor: dims must be positive");
  }

  size_t size() const { return data.size(); }

  float& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }

  bool same_shape(const Tensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  bool operator==(const Tensor& o) const {
    return same_shape(o) && data == o.data;
  }

  void check_finite(const char* where) const {
    for (float v : data)
      if (!std::isfinite(v))
        throw std::runtime_error(std::string("non-finite value after ") + where);
  }
};

constexpr uint8_t kIgnoreLabel = 255;

// Per-pixel class indices; 255 is the reserved ignore value.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> labels;

  LabelMap() = default;
  LabelMap(int h, int w, uint8_t fill = 0)
      : height(h), width(w), labels(static_cast<size_t>(h) * w, fill) {
    if (h < 1 || w < 1)
      throw std::invalid_argument("LabelMap: dims must be positive");
  }

  size_t size() const { return labels.size(); }

  uint8_t& at(int y, int x) { return labels[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return labels[static_cast<size_t>(y) * width + x]; }

  bool same_shape(const LabelMap& o) const {
    return height == o.height && width == o.width;
  }

  bool operator==(const LabelMap& o) const {
    return same_shape(o) && labels == o.labels;
  }
};

// ---------------------------------------------------------------------------
// CWKT container: magic "CWKT", version 0x01, dtype byte (0x00 u8, 0x01 f32
// little-endian), ndim byte, ndim x u32 LE dims, row-major payload.

namespace detail {

inline void put_u32le(std::ostream& os, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("cwkt: truncated header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void write_header(std::ostream& os, uint8_t dtype,
                         const std::vector<uint32_t>& dims) {
  os.write("CWKT", 4);
  os.put(0x01);
  os.put(static_cast<char>(dtype));
  os.put(static_cast<char>(dims.size()));
  for (uint32_t d : dims) put_u32le(os, d);
}

inline std::vector<uint32_t> read_header(std::istream& is, uint8_t expect_dtype) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "CWKT", 4) != 0)
    throw std::runtime_error("cwkt: bad magic");
  int version = is.get();
  if (version != 0x01) throw std::runtime_error("cwkt: unsupported version");
  int dtype = is.get();
  if (dtype != expect_dtype) throw std::runtime_error("cwkt: unexpected dtype");
  int ndim = is.get();
  if (ndim < 1 || ndim > 8) throw std::runtime_error("cwkt: bad ndim");
  std::vector<uint32_t> dims(ndim);
  for (auto& d : dims) d = get_u32le(is);
  return dims;
}

}  // namespace detail

inline void write_f32(std::ostream& os, const std::vector<uint32_t>& dims,
                      const std::vector<float>& payload) {
  detail::write_header(os, 0x01, dims);
  for (float v : payload) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    detail::put_u32le(os, bits);
  }
}

inline std::vector<float> read_f32(std::istream& is, std::vector<uint32_t>& dims) {
  dims = detail::read_header(is, 0x01);
  size_t n = 1;
  for (uint32_t d : dims) n *= d;
  std::vector<float> payload(n);
  for (auto& v : payload) {
    uint32_t bits = detail::get_u32le(is);
    std::memcpy(&v, &bits, 4);
  }
  if (!is) throw std::runtime_error("cwkt: truncated payload");
  return payload;
}

inline void save_tensor(const Tensor& t, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cwkt: cannot open " + path);
  write_f32(os, {static_cast<uint32_t>(t.channels), static_cast<uint32_t>(t.height),
                 static_cast<uint32_t>(t.width)},
            t.data);
}

inline Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cwkt: cannot open " + path);
  std::vector<uint32_t> dims;
  auto payload = read_f32(is, dims);
  if (dims.size() != 3) throw std::runtime_error("cwkt: tensor needs 3 dims");
  Tensor t(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
           static_cast<int>(dims[2]));
  t.data = std::move(payload);
  return t;
}

inline void save_labels(const LabelMap& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cwkt: cannot open " + path);
  detail::write_header(os, 0x00, {static_cast<uint32_t>(m.height),
                                  static_cast<uint32_t>(m.width)});
  os.write(reinterpret_cast<const char*>(m.labels.data()),
           static_cast<std::streamsize>(m.labels.size()));
}

inline LabelMap load_labels(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cwkt: cannot open " + path);
  auto dims = detail::read_header(is, 0x00);
  if (dims.size() != 2) throw std::runtime_error("cwkt: label map needs 2 dims");
  LabelMap m(static_cast<int>(dims[0]), static_cast<int>(dims[1]));
  is.read(reinterpret_cast<char*>(m.labels.data()),
          static_cast<std::streamsize>(m.labels.size()));
  if (is.gcount() != static_cast<std::streamsize>(m.labels.size()))
    throw std::runtime_error("cwkt: truncated payload");
  return m;
}

}  // namespace cwk
