#include "pnpsr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "pnpsr/errors.hpp"

namespace pnpsr::io {

namespace fs = std::filesystem;

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

std::uint64_t get_le(const unsigned char* b, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

template <typename Writer>
void write_raw(const fs::path& path, std::size_t h, std::size_t w, std::span<const double> data,
               Writer put_pixel) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  put_u32(os, static_cast<std::uint32_t>(h));
  put_u32(os, static_cast<std::uint32_t>(w));
  for (double v : data) put_pixel(os, v);
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

void write_raw_f32(const fs::path& path, const ImageGrid& image) {
  write_raw(path, image.height(), image.width(), image.data(), [](std::ostream& os, double v) {
    put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  });
}

void write_raw_f64(const fs::path& path, const ImageGrid& image) {
  write_raw(path, image.height(), image.width(), image.data(),
            [](std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); });
}

ImageGrid read_raw(const fs::path& path) {
  const std::string ext = lower_extension(path);
  const int pixel_bytes = ext == ".f64" ? 8 : 4;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 8) throw IoError("'" + path.string() + "': raw header truncated");
  const std::uint64_t h = get_le(bytes.data(), 4);
  const std::uint64_t w = get_le(bytes.data() + 4, 4);
  if (h == 0 || w == 0) throw IoError("'" + path.string() + "': zero dimension");
  if (bytes.size() != 8 + h * w * pixel_bytes) {
    throw IoError("'" + path.string() + "': size does not match header");
  }
  std::vector<double> data(h * w);
  const unsigned char* p = bytes.data() + 8;
  for (std::size_t i = 0; i < data.size(); ++i, p += pixel_bytes) {
    data[i] = pixel_bytes == 8
                  ? std::bit_cast<double>(get_le(p, 8))
                  : static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(get_le(p, 4))));
    if (!std::isfinite(data[i])) throw IoError("'" + path.string() + "': non-finite pixel");
  }
  return ImageGrid(h, w, std::move(data));
}

namespace {

struct PngErrors {
  std::string message;
};

[[noreturn]] void png_on_error(png_structp png, png_const_charp msg) {
  static_cast<PngErrors*>(png_get_error_ptr(png))->message = msg;
  png_longjmp(png, 1);
}

void png_on_warning(png_structp, png_const_charp) {}

}  // namespace

void write_png16(const fs::path& path, const ImageGrid& image) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot open '" + path.string() + "' for writing");
  PngErrors errors;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &errors, png_on_error, png_on_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed");
  }
  std::vector<unsigned char> row(image.width() * 2);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng write failed for '" + path.string() + "': " + errors.message);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < image.height(); ++r) {
    for (std::size_t c = 0; c < image.width(); ++c) {
      const double v = std::clamp(image(r, c), 0.0, 1.0);
      const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      row[2 * c] = static_cast<unsigned char>(q >> 8);  // PNG is big-endian
      row[2 * c + 1] = static_cast<unsigned char>(q & 0xFF);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageGrid read_png(const fs::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw IoError("cannot open '" + path.string() + "'");
  PngErrors errors;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &errors, png_on_error, png_on_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed");
  }
  std::vector<unsigned char> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("'" + path.string() + "' is not a readable PNG: " + errors.message);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color & PNG_COLOR_MASK_COLOR || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  const std::size_t w = png_get_image_width(png, info);
  const std::size_t h = png_get_image_height(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * h);
  rows.resize(h);
  for (std::size_t r = 0; r < h; ++r) rows[r] = buffer.data() + r * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  ImageGrid out(h, w);
  const double maxv = out_depth == 16 ? 65535.0 : 255.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const unsigned char* px = rows[r] + (out_depth == 16 ? 2 * c : c);
      const double v = out_depth == 16 ? (px[0] << 8 | px[1]) : px[0];
      out(r, c) = v / maxv;
    }
  }
  return out;
}

ImageGrid read_image(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("'" + path.string() + "' does not exist");
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".f32" || ext == ".raw" || ext == ".f64") return read_raw(path);
  throw IoError("'" + path.string() + "': unsupported image extension (use .png, .f32, .raw, .f64)");
}

void write_kernel(const fs::path& path, const KernelGrid& kernel) {
  write_raw_f32(path, ImageGrid(kernel.side(), kernel.side(), kernel.values()));
}

void write_kernel_f64(const fs::path& path, const KernelGrid& kernel) {
  write_raw_f64(path, ImageGrid(kernel.side(), kernel.side(), kernel.values()));
}

KernelGrid read_kernel(const fs::path& path) {
  const ImageGrid g = read_raw(path);
  if (g.height() != g.width() || g.height() % 2 == 0) {
    throw IoError("'" + path.string() + "': kernel must be square with odd side");
  }
  return KernelGrid(g.height(), g.values());
}

void write_trace_csv(const fs::path& path, const IterationTrace& trace, bool timing) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "w"), &std::fclose);
  if (!fp) throw IoError("cannot open '" + path.string() + "' for writing");
  std::fprintf(fp.get(), "k,f,phi,F,H,lambda_k,backtracks,branch,stationarity,wall_ms\n");
  // Row 0: the initial point (f and phi are not split there).
  std::fprintf(fp.get(), "0,,,%.17g,%.17g,,,,,\n", trace.initial_objective, trace.initial_merit);
  for (const IterationRecord& r : trace.records) {
    std::fprintf(fp.get(), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%s,%.17g,%.17g\n", r.k, r.f, r.phi,
                 r.objective, r.merit, r.lambda, r.backtracks, to_string(r.branch), r.stationarity,
                 timing ? r.wall_ms : 0.0);
  }
  if (std::ferror(fp.get())) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace pnpsr::io
