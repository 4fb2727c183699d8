#include "mrnet/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

#include "mrnet/errors.hpp"

namespace mrnet {

ImageGrid::ImageGrid(int w, int h, int c, double fill)
    : width(w), height(h), channels(c), samples(static_cast<std::size_t>(w) * h * c, fill) {
  if (w < 1 || h < 1 || c < 1) throw ImageError("image dimensions must be positive");
}

void ImageGrid::validate() const {
  if (samples.size() != pixel_count() * channels) throw ImageError("image sample count mismatch");
  for (double v : samples) {
    if (!(v >= 0.0 && v <= 1.0)) throw ImageError("image sample outside [0, 1]");
  }
}

ImageGrid clamped(ImageGrid grid) {
  for (double& v : grid.samples) v = std::clamp(v, 0.0, 1.0);
  return grid;
}

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

unsigned to_code(double v, unsigned maxval) {
  return static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
}

// ---- PGM / PPM --------------------------------------------------------------

class PnmParser {
 public:
  explicit PnmParser(const std::vector<unsigned char>& b) : b_(b) {}

  int next_int() {
    skip_space_and_comments();
    if (pos_ >= b_.size() || !std::isdigit(b_[pos_])) throw ImageError("corrupt PNM header");
    long v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > 1'000'000) throw ImageError("PNM header value too large");
    }
    return static_cast<int>(v);
  }
  // Exactly one whitespace byte separates the header from the raster.
  void end_header() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw ImageError("corrupt PNM header");
    ++pos_;
  }
  std::size_t pos() const { return pos_; }

 private:
  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }
  const std::vector<unsigned char>& b_;
  std::size_t pos_ = 2;
};

ImageGrid load_pnm(const std::vector<unsigned char>& bytes) {
  const int channels = bytes[1] == '5' ? 1 : 3;
  PnmParser p(bytes);
  const int w = p.next_int();
  const int h = p.next_int();
  const int maxval = p.next_int();
  p.end_header();
  if (w < 1 || h < 1) throw ImageError("PNM image has zero size");
  if (maxval < 1 || maxval > 65535) throw ImageError("PNM maxval out of range");
  const int bytes_per = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() - p.pos() < n * bytes_per) throw ImageError("PNM raster truncated");
  ImageGrid g(w, h, channels);
  const unsigned char* r = bytes.data() + p.pos();
  for (std::size_t k = 0; k < n; ++k) {
    unsigned code = bytes_per == 1 ? r[k] : (static_cast<unsigned>(r[2 * k]) << 8) | r[2 * k + 1];
    if (code > static_cast<unsigned>(maxval)) throw ImageError("PNM sample exceeds maxval");
    g.samples[k] = static_cast<double>(code) / maxval;
  }
  return g;
}

void save_pnm(const ImageGrid& g, const std::filesystem::path& path, int bit_depth) {
  if (g.channels != 1 && g.channels != 3) throw ImageError("PNM output needs 1 or 3 channels");
  const unsigned maxval = bit_depth == 16 ? 65535u : 255u;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageError("cannot open '" + path.string() + "' for writing");
  out << (g.channels == 1 ? "P5" : "P6") << '\n' << g.width << ' ' << g.height << '\n' << maxval << '\n';
  std::vector<unsigned char> raster;
  raster.reserve(g.samples.size() * (bit_depth / 8));
  for (double v : g.samples) {
    const unsigned c = to_code(v, maxval);
    if (bit_depth == 16) raster.push_back(static_cast<unsigned char>(c >> 8));
    raster.push_back(static_cast<unsigned char>(c & 0xFF));
  }
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw ImageError("failed writing '" + path.string() + "'");
}

// ---- PNG --------------------------------------------------------------------

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Keeps libpng quiet; the message ends up in the thrown ImageError.
void png_error_to_string(png_structp png, png_const_charp msg) {
  if (auto* out = static_cast<std::string*>(png_get_error_ptr(png))) *out = msg;
  png_longjmp(png, 1);
}
void png_ignore_warning(png_structp, png_const_charp) {}

ImageGrid load_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ImageError("cannot open '" + path.string() + "'");
  std::string why;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &why, png_error_to_string, png_ignore_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("libpng initialization failed");
  }
  std::vector<png_byte> raster;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("corrupt PNG file '" + path.string() + "': " + why);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int file_depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && file_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raster.resize(rowbytes * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = raster.data() + y * rowbytes;
  // Re-arm after the buffers are sized so a longjmp never sees them mid-change.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("corrupt PNG file '" + path.string() + "': " + why);
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) throw ImageError("unsupported PNG channel layout");
  ImageGrid g(static_cast<int>(w), static_cast<int>(h), channels);
  const double maxval = depth == 16 ? 65535.0 : 255.0;
  const std::size_t n = g.samples.size();
  for (std::size_t k = 0; k < n; ++k) {
    const unsigned code = depth == 16 ? (static_cast<unsigned>(raster[2 * k]) << 8) | raster[2 * k + 1] : raster[k];
    g.samples[k] = code / maxval;
  }
  return g;
}

void save_png(const ImageGrid& g, const std::filesystem::path& path, int bit_depth) {
  if (g.channels != 1 && g.channels != 3) throw ImageError("PNG output needs 1 or 3 channels");
  const unsigned maxval = bit_depth == 16 ? 65535u : 255u;
  const std::size_t bytes_per = static_cast<std::size_t>(bit_depth / 8);
  std::vector<png_byte> raster;
  raster.reserve(g.samples.size() * bytes_per);
  for (double v : g.samples) {
    const unsigned c = to_code(v, maxval);
    if (bit_depth == 16) raster.push_back(static_cast<png_byte>(c >> 8));
    raster.push_back(static_cast<png_byte>(c & 0xFF));
  }
  const std::size_t rowbytes = static_cast<std::size_t>(g.width) * g.channels * bytes_per;
  std::vector<png_bytep> rows(g.height);
  for (int y = 0; y < g.height; ++y) rows[y] = raster.data() + y * rowbytes;

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw ImageError("cannot open '" + path.string() + "' for writing");
  std::string why;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &why, png_error_to_string, png_ignore_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw ImageError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageError("failed writing PNG '" + path.string() + "': " + why);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(g.width), static_cast<png_uint_32>(g.height), bit_depth,
               g.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageGrid load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open image '" + path.string() + "'");
  std::vector<unsigned char> head(8, 0);
  in.read(reinterpret_cast<char*>(head.data()), 8);
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got >= 8 && png_sig_cmp(head.data(), 0, 8) == 0) return load_png(path);
  if (got >= 2 && head[0] == 'P' && (head[1] == '5' || head[1] == '6')) {
    in.clear();
    in.seekg(0);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_pnm(bytes);
  }
  throw ImageError("unsupported image format: '" + path.string() + "'");
}

void save_image(const ImageGrid& grid, const std::filesystem::path& path, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ImageError("bit depth must be 8 or 16");
  if (grid.samples.size() != grid.pixel_count() * grid.channels) throw ImageError("image sample count mismatch");
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    save_png(grid, path, bit_depth);
  } else if (ext == ".pgm" || ext == ".ppm") {
    save_pnm(grid, path, bit_depth);
  } else {
    throw ImageError("unsupported output extension '" + ext + "' (use .png, .pgm or .ppm)");
  }
}

}  // namespace mrnet
