#include "pyrolens/image_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include <png.h>

namespace pyrolens {

namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct NetpbmHeader {
  char kind = 0;
  long width = 0;
  long height = 0;
  std::size_t data_offset = 0;
};

NetpbmHeader parse_netpbm(const std::vector<unsigned char>& bytes, const fs::path& path) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw ImageIoError(path.string() + ": not a binary PGM/PPM file");
  NetpbmHeader hdr;
  hdr.kind = static_cast<char>(bytes[1]);
  std::size_t pos = 2;
  std::array<long, 3> fields{};
  for (long& field : fields) {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw ImageIoError(path.string() + ": malformed header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1L << 24)) throw ImageIoError(path.string() + ": header value too large");
    }
    field = v;
  }
  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw ImageIoError(path.string() + ": malformed header");
  ++pos;
  hdr.width = fields[0];
  hdr.height = fields[1];
  if (hdr.width < 1 || hdr.height < 1) throw ImageIoError(path.string() + ": empty image");
  if (fields[2] != 255) throw ImageIoError(path.string() + ": only maxval 255 is supported");
  hdr.data_offset = pos;
  const std::size_t need = static_cast<std::size_t>(hdr.width * hdr.height) * (hdr.kind == '5' ? 1 : 3);
  if (bytes.size() - pos < need) throw ImageIoError(path.string() + ": truncated raster");
  return hdr;
}

void write_netpbm(const fs::path& path, char kind, long width, long height, const Plane<std::uint8_t>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path.string());
  out << 'P' << kind << '\n' << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(samples.data()), static_cast<std::streamsize>(samples.size()));
  if (!out) throw ImageIoError("write failed: " + path.string());
}

}  // namespace

GrayImage read_pgm(const fs::path& path) {
  const auto bytes = slurp(path);
  const auto hdr = parse_netpbm(bytes, path);
  if (hdr.kind != '5') throw ImageIoError(path.string() + ": expected P5");
  GrayImage img(hdr.height, hdr.width);
  std::memcpy(img.data(), bytes.data() + hdr.data_offset, static_cast<std::size_t>(img.size()));
  return img;
}

void write_pgm(const fs::path& path, const GrayImage& img) { write_netpbm(path, '5', img.cols(), img.rows(), img); }

RgbImage read_ppm(const fs::path& path) {
  const auto bytes = slurp(path);
  const auto hdr = parse_netpbm(bytes, path);
  if (hdr.kind != '6') throw ImageIoError(path.string() + ": expected P6");
  RgbImage img(hdr.width, hdr.height);
  std::memcpy(img.samples().data(), bytes.data() + hdr.data_offset, static_cast<std::size_t>(img.samples().size()));
  return img;
}

void write_ppm(const fs::path& path, const RgbImage& img) {
  write_netpbm(path, '6', img.width(), img.height(), img.samples());
}

Image read_png(const fs::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    throw ImageIoError(path.string() + ": " + png.message);
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Plane<std::uint8_t> samples(png.height, png.width * (color ? 3 : 1));
  if (!png_image_finish_read(&png, nullptr, samples.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw ImageIoError(path.string() + ": " + msg);
  }
  if (color) return RgbImage(std::move(samples));
  return GrayImage(std::move(samples));
}

void write_png(const fs::path& path, const Image& img) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(width_of(img));
  png.height = static_cast<png_uint_32>(height_of(img));
  png.format = channels_of(img) == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, samples_of(img).data(), 0, nullptr))
    throw ImageIoError(path.string() + ": " + png.message);
}

Image read_image(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() >= 2 && magic[0] == 'P' && magic[1] == '5') return read_pgm(path);
  if (in.gcount() >= 2 && magic[0] == 'P' && magic[1] == '6') return read_ppm(path);
  if (in.gcount() == 8 && std::memcmp(magic.data(), "\x89PNG\r\n\x1a\n", 8) == 0) return read_png(path);
  throw ImageIoError(path.string() + ": unrecognized image format");
}

void write_image(const fs::path& path, const Image& img) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return write_png(path, img);
  if (ext == ".pgm") {
    if (const auto* g = std::get_if<GrayImage>(&img)) return write_pgm(path, *g);
    throw ImageIoError(path.string() + ": PGM output requires a grayscale image");
  }
  if (ext == ".ppm") {
    if (const auto* c = std::get_if<RgbImage>(&img)) return write_ppm(path, *c);
    throw ImageIoError(path.string() + ": PPM output requires an RGB image");
  }
  throw ImageIoError(path.string() + ": unsupported output extension");
}

bool is_image_file(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm" || ext == ".ppm";
}

}  // namespace pyrolens
