#include "aind/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "aind/metrics.hpp"

namespace aind {

namespace fs = std::filesystem;

std::uint8_t quantize8(float v) {
  const double x = std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::round(x));
}

std::uint16_t quantize16(float v) {
  const double x = std::clamp(static_cast<double>(v), 0.0, 1.0) * 65535.0;
  return static_cast<std::uint16_t>(std::round(x));
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const fs::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

// libpng reports errors by longjmp; the message is parked here and turned
// into an exception once control is back in C++ code.
struct PngError {
  char message[256] = {};
};

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  auto* err = static_cast<PngError*>(png_get_error_ptr(png));
  std::snprintf(err->message, sizeof err->message, "%s", msg);
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

Tensor<float> read_png(const fs::path& path) {
  File f = open_file(path, "rb");
  PngError err;
  std::vector<std::uint8_t> buf;
  std::vector<png_bytep> rows;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  if (png == nullptr) throw IoError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  if (setjmp(png_jmpbuf(png))) throw IoError("png " + path.string() + ": " + err.message);

  png_init_io(png, f.get());
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int out_depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buf.resize(rowbytes * h);
  rows.resize(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  const int color_channels = channels >= 3 ? 3 : 1;
  Tensor<float> out({1, h, w, color_channels});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < color_channels; ++c) {
        const std::size_t idx = static_cast<std::size_t>(x) * channels + c;
        float v;
        if (out_depth == 16) {
          std::uint16_t s;
          std::memcpy(&s, rows[y] + 2 * idx, 2);
          v = static_cast<float>(s / 65535.0);
        } else {
          v = static_cast<float>(rows[y][idx] / 255.0);
        }
        out.at(0, y, x, c) = v;
      }
    }
  }
  return out;
}

int read_pnm_int(std::istream& in) {
  int c = in.peek();
  while (c == '#' || std::isspace(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else {
      in.get();
    }
    c = in.peek();
  }
  int v = -1;
  in >> v;
  if (!in || v < 0) throw IoError("malformed PNM header");
  return v;
}

Tensor<float> read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw IoError(path.string() + ": only binary PGM (P5) and PPM (P6) are supported");
  }
  const int channels = magic[1] == '6' ? 3 : 1;
  const int w = read_pnm_int(in);
  const int h = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw IoError(path.string() + ": bad PNM header");
  in.get();
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * channels * bytes);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw IoError(path.string() + ": truncated PNM data");
  Tensor<float> out({1, h, w, channels});
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int v = bytes == 2 ? (buf[2 * i] << 8) | buf[2 * i + 1] : buf[i];
    d[i] = static_cast<float>(static_cast<double>(v) / maxval);
  }
  return out;
}

void check_writable_image(const Tensor<float>& image) {
  const Shape s = image.shape();
  if (s.n != 1 || (s.c != 1 && s.c != 3) || s.h <= 0 || s.w <= 0) {
    throw ShapeError("cannot write image of shape " + s.str());
  }
}

}  // namespace

Tensor<float> read_image(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  unsigned char head[8] = {};
  in.read(reinterpret_cast<char*>(head), 8);
  in.close();
  if (png_sig_cmp(head, 0, 8) == 0) return read_png(path);
  if (head[0] == 'P') return read_pnm(path);
  throw IoError(path.string() + ": unrecognized image format");
}

void write_png(const fs::path& path, const Tensor<float>& image, int bit_depth) {
  check_writable_image(image);
  if (bit_depth != 8 && bit_depth != 16) throw ConfigError("PNG bit depth must be 8 or 16");
  const Shape s = image.shape();
  File f = open_file(path, "wb");
  PngError err;
  const std::size_t row_values = static_cast<std::size_t>(s.w) * s.c;
  std::vector<std::uint8_t> row(row_values * (bit_depth / 8));
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  if (png == nullptr) throw IoError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  if (setjmp(png_jmpbuf(png))) throw IoError("png " + path.string() + ": " + err.message);

  png_init_io(png, f.get());
  png_set_IHDR(png, info, s.w, s.h, bit_depth, s.c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < s.h; ++y) {
    const float* src = &image.at(0, y, 0, 0);
    for (std::size_t i = 0; i < row_values; ++i) {
      if (bit_depth == 8) {
        row[i] = quantize8(src[i]);
      } else {
        const std::uint16_t v = quantize16(src[i]);
        row[2 * i] = static_cast<std::uint8_t>(v >> 8);
        row[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

void write_pnm(const fs::path& path, const Tensor<float>& image) {
  check_writable_image(image);
  const Shape s = image.shape();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << (s.c == 3 ? "P6" : "P5") << "\n" << s.w << " " << s.h << "\n255\n";
  std::vector<std::uint8_t> bytes(image.size());
  auto d = image.data();
  for (std::size_t i = 0; i < d.size(); ++i) bytes[i] = quantize8(d[i]);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_image(const fs::path& path, const Tensor<float>& image) {
  const std::string ext = path.extension().string();
  if (ext == ".png") return write_png(path, image, 8);
  if (ext == ".ppm" || ext == ".pgm") return write_pnm(path, image);
  throw ConfigError("unsupported image extension '" + ext + "'");
}

void write_raw(const fs::path& path, const Tensor<float>& t) {
  static_assert(std::endian::native == std::endian::little);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(t.data().data()),
            static_cast<std::streamsize>(t.data().size_bytes()));
  if (!out) throw IoError("failed writing " + path.string());
}

Tensor<float> read_raw(const fs::path& path, Shape shape) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != shape.numel() * sizeof(float)) {
    throw IoError(path.string() + ": size does not match shape " + shape.str());
  }
  in.seekg(0);
  Tensor<float> t(shape);
  in.read(reinterpret_cast<char*>(t.data().data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("failed reading " + path.string());
  return t;
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".ppm" || ext == ".pgm") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Tensor<float> convert_channels(const Tensor<float>& image, int channels) {
  const Shape s = image.shape();
  if (s.c == channels) return image.detached();
  if (s.c == 3 && channels == 1) return to_luma(image);
  if (s.c == 1 && channels == 3) {
    Tensor<float> out({s.n, s.h, s.w, 3});
    auto src = image.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = src[i];
    return out;
  }
  throw ShapeError("cannot convert " + s.str() + " to " + std::to_string(channels) + " channels");
}

}  // namespace aind
