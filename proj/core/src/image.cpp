#include "pyrabow/image.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

#include <jpeglib.h>
#include <png.h>

#include "pyrabow/error.hpp"

namespace pyrabow {
namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError(path.string() + ": cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class PgmReader {
 public:
  explicit PgmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  // Reads one whitespace-delimited header integer, skipping '#' comments.
  long next_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
      throw DecodeError("malformed PGM header");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1L << 30)) throw DecodeError("PGM header value out of range");
    }
    return v;
  }

  // Exactly one whitespace byte separates the header from binary data.
  void skip_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw DecodeError("malformed PGM header");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

GrayImage decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw DecodeError(std::string("PNG: ") + image.message);

  // Read as RGB and apply BT.601 ourselves; libpng's own gray conversion
  // uses different weights.
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError("PNG: " + msg);
  }

  GrayImage img(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = luminance(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
  return img;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Fills `rgb_or_gray` and dimensions; returns false with `err.message` set on
// failure. No objects with destructors live across the setjmp.
bool jpeg_decode_raw(const std::vector<std::uint8_t>& bytes,
                     std::vector<std::uint8_t>& out, int& width, int& height,
                     int& channels, JpegErrorManager& err) {
  jpeg_decompress_struct cinfo;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.jpeg_color_space != JCS_GRAYSCALE) cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  channels = cinfo.output_components;
  out.resize(static_cast<std::size_t>(width) * height * channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.data() + static_cast<std::size_t>(cinfo.output_scanline) *
                                    width * channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

GrayImage decode_jpeg(const std::vector<std::uint8_t>& bytes) {
  std::vector<std::uint8_t> raw;
  int width = 0, height = 0, channels = 0;
  auto err = std::make_unique<JpegErrorManager>();
  if (!jpeg_decode_raw(bytes, raw, width, height, channels, *err))
    throw DecodeError(std::string("JPEG: ") + err->message);

  GrayImage img(width, height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (channels == 1) {
      img.pixels[i] = raw[i] / 255.0f;
    } else {
      img.pixels[i] = luminance(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]);
    }
  }
  return img;
}

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2'))
    throw DecodeError("not a PGM file");
  const bool binary = bytes[1] == '5';
  PgmReader rd(bytes);
  const long width = rd.next_int();
  const long height = rd.next_int();
  const long maxval = rd.next_int();
  if (width <= 0 || height <= 0) throw DecodeError("PGM has zero size");
  if (maxval <= 0 || maxval > 65535) throw DecodeError("PGM maxval out of range");

  GrayImage img(static_cast<int>(width), static_cast<int>(height));
  const double scale = 1.0 / static_cast<double>(maxval);
  if (binary) {
    rd.skip_single_space();
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    if (rd.remaining() < img.pixels.size() * bpp)
      throw DecodeError("PGM pixel data truncated");
    const std::uint8_t* p = bytes.data() + rd.pos();
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      const unsigned v = bpp == 2 ? (p[2 * i] << 8) | p[2 * i + 1] : p[i];
      img.pixels[i] = static_cast<float>(std::min<double>(v * scale, 1.0));
    }
  } else {
    for (auto& px : img.pixels) {
      long v = 0;
      try {
        v = rd.next_int();
      } catch (const DecodeError&) {
        throw DecodeError("PGM pixel data truncated");
      }
      px = static_cast<float>(std::min<double>(v * scale, 1.0));
    }
  }
  return img;
}

GrayImage load_grayscale(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  static constexpr std::uint8_t kPngSig[] = {0x89, 'P', 'N', 'G'};
  try {
    if (bytes.empty()) throw DecodeError("empty file");
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '2'))
      return decode_pgm(bytes);
    if (bytes.size() >= 4 && std::equal(std::begin(kPngSig), std::end(kPngSig),
                                        bytes.begin()))
      return decode_png(bytes);
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
      return decode_jpeg(bytes);
    throw DecodeError("unsupported image format");
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<char> row(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const float v = std::clamp(img.pixels[i], 0.0f, 1.0f);
    row[i] = static_cast<char>(static_cast<std::uint8_t>(v * 255.0f + 0.5f));
  }
  out.write(row.data(), static_cast<std::streamsize>(row.size()));
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace pyrabow
