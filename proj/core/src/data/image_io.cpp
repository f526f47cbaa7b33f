#include "harmony/data/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "harmony/error.hpp"

namespace harmony {
namespace {

ImageTensor read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot decode image '" + path.string() + "': " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  const int h = static_cast<int>(image.height);
  const int w = static_cast<int>(image.width);
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode image '" + path.string() + "': " + msg);
  }
  ImageTensor out(channels, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        out.at(c, y, x) = buffer[(static_cast<std::size_t>(y) * w + x) * channels + c] / 255.0;
      }
    }
  }
  return out;
}

// Binary PGM (P5) / PPM (P6).
ImageTensor read_pnm(const std::filesystem::path& path, const std::string& bytes) {
  std::size_t pos = 2;
  auto next_int = [&]() -> long {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
      if (v > 1 << 24) break;
    }
    if (!any) throw IoError("cannot decode image '" + path.string() + "': malformed PNM header");
    return v;
  };
  const int channels = bytes[1] == '6' ? 3 : 1;
  const long w = next_int();
  const long h = next_int();
  const long maxval = next_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw IoError("cannot decode image '" + path.string() + "': invalid PNM header values");
  }
  ++pos;  // single whitespace before raster
  const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::size_t need = static_cast<std::size_t>(w * h * channels) * sample_bytes;
  if (pos + need > bytes.size()) {
    throw IoError("cannot decode image '" + path.string() + "': truncated raster");
  }
  ImageTensor out(channels, static_cast<int>(h), static_cast<int>(w));
  const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t i = static_cast<std::size_t>((y * w + x) * channels + c);
        const double s = sample_bytes == 2 ? (raster[2 * i] << 8) | raster[2 * i + 1] : raster[i];
        out.at(c, static_cast<int>(y), static_cast<int>(x)) =
            std::min(1.0, s / static_cast<double>(maxval));
      }
    }
  }
  return out;
}

}  // namespace

ImageTensor read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() >= 8 && static_cast<unsigned char>(bytes[0]) == 0x89 && bytes[1] == 'P' &&
      bytes[2] == 'N' && bytes[3] == 'G') {
    return read_png(path);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
    return read_pnm(path, bytes);
  }
  throw IoError("cannot decode image '" + path.string() + "': unrecognised format");
}

void write_png(const std::filesystem::path& path, const ImageTensor& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw ParameterError("write_png needs 1 or 3 channels");
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int ch = image.channels();
  std::vector<png_byte> buffer(static_cast<std::size_t>(image.height()) * image.width() * ch);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < ch; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        buffer[(static_cast<std::size_t>(y) * image.width() + x) * ch + c] =
            static_cast<png_byte>(std::lround(v * 255.0));
      }
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot write image '" + path.string() + "': " + png.message);
  }
}

}  // namespace harmony
