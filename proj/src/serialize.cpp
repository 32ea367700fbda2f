#include "vsr/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace vsr {

static_assert(std::endian::native == std::endian::little, "VSRT I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'V', 'S', 'R', 'T'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw FormatError(FormatErrorKind::Truncated, std::string("truncated VSRT data while reading ") + what);
  }
  return v;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  if (t.ndim() > kMaxTensorDims) throw ShapeError("cannot serialize tensor of rank " + std::to_string(t.ndim()));
  out.write(kMagic, 4);
  put<std::uint8_t>(out, kTensorFormatVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(t.ndim()));
  for (auto e : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(e));
  dispatch(t.dtype(), [&]<typename T>() {
    auto d = t.data<T>();
    out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size_bytes()));
  });
  if (!out) throw IoError("failed writing VSRT record");
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw FormatError(FormatErrorKind::Truncated, "truncated VSRT header");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(FormatErrorKind::BadMagic, "bad VSRT magic");
  const auto version = get<std::uint8_t>(in, "version");
  if (version != kTensorFormatVersion) {
    throw FormatError(FormatErrorKind::BadVersion, "unsupported VSRT version " + std::to_string(version));
  }
  const auto dtype = get<std::uint8_t>(in, "dtype");
  if (dtype > 1) throw FormatError(FormatErrorKind::BadDtype, "dtype code " + std::to_string(dtype) + " out of range");
  const auto ndim = get<std::uint8_t>(in, "ndim");
  if (ndim < 1 || ndim > kMaxTensorDims) {
    throw FormatError(FormatErrorKind::BadNdim, "ndim " + std::to_string(ndim) + " out of range 1..6");
  }
  Shape shape;
  for (int i = 0; i < ndim; ++i) {
    const auto e = get<std::uint32_t>(in, "extent");
    if (e == 0) throw FormatError(FormatErrorKind::BadNdim, "zero extent in VSRT header");
    shape.push_back(e);
  }
  const auto n = static_cast<std::size_t>(numel_of(shape));
  auto read_payload = [&]<typename T>() {
    std::vector<T> values(n);
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(T)))) {
      throw FormatError(FormatErrorKind::Truncated, "truncated VSRT payload");
    }
    return Tensor::from_data(shape, std::move(values));
  };
  if (dtype == 0) return read_payload.operator()<float>();
  return read_payload.operator()<double>();
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor(out, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_tensor(in);
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xFFFF) throw IoError("tensor name too long: " + name.substr(0, 32));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(out, t);
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const auto count = get<std::uint32_t>(in, "entry count");
  NamedTensors result;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint16_t>(in, "name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError(FormatErrorKind::Truncated, "truncated tensor name");
    result.emplace_back(std::move(name), read_tensor(in));
  }
  return result;
}

}  // namespace vsr
