#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <regex>

#include "vsr/data.hpp"

namespace vsr {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

std::string frame_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%08d.png", index);
  return buf;
}

Tensor read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  const std::int64_t h = image.height, w = image.width;
  std::vector<float> v(static_cast<std::size_t>(3 * h * w));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        v[static_cast<std::size_t>((c * h + y) * w + x)] = static_cast<float>(pixels[static_cast<std::size_t>((y * w + x) * 3 + c)]) / 255.0f;
  return Tensor::from_data({3, h, w}, std::move(v));
}

void write_png(const std::filesystem::path& path, const Tensor& frame) {
  if (frame.ndim() != 3 || frame.dim(0) != 3) throw ShapeError("write_png: expected (3,H,W), got " + shape_str(frame.shape()));
  const std::int64_t h = frame.dim(1), w = frame.dim(2);
  const auto v = frame.to_vector();
  std::vector<png_byte> pixels(static_cast<std::size_t>(3 * h * w));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double s = std::clamp(v[static_cast<std::size_t>((c * h + y) * w + x)], 0.0, 1.0);
        pixels[static_cast<std::size_t>((y * w + x) * 3 + c)] = static_cast<png_byte>(std::floor(s * 255.0 + 0.5));
      }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_RGB;
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  if (!png_image_write_to_stdio(&image, file.get(), 0, pixels.data(), 0, nullptr)) {
    throw IoError("cannot encode PNG " + path.string() + ": " + image.message);
  }
}

VideoSequence load_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  static const std::regex pattern(R"(frame_(\d{8})\.png)");
  std::map<long, std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) files[std::stol(m[1].str())] = entry.path();
  }
  if (files.empty()) throw IoError("no frame_%08d.png files in " + dir.string());
  VideoSequence seq;
  long expected = 0;
  for (const auto& [index, path] : files) {
    if (index != expected) throw MissingFrameError(expected);
    Tensor frame = read_png(path);
    if (!seq.frames.empty() && frame.shape() != seq.frames[0].shape()) {
      throw ShapeError("frame " + std::to_string(index) + " has extents " + shape_str(frame.shape()) + ", expected " +
                       shape_str(seq.frames[0].shape()));
    }
    seq.frames.push_back(std::move(frame));
    ++expected;
  }
  return seq;
}

void save_frames(const VideoSequence& seq, const std::filesystem::path& dir) {
  seq.validate();
  std::filesystem::create_directories(dir);
  for (int i = 0; i < seq.length(); ++i) write_png(dir / frame_filename(i), seq.frames[static_cast<std::size_t>(i)]);
}

}  // namespace vsr
