#include "cycledance/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

static_assert(std::endian::native == std::endian::little,
              "TNSR writer assumes a little-endian host");

namespace cycledance {

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  char buf[sizeof(T)];
  is.read(buf, sizeof(T));
  if (!is) throw ValidationError("tnsr_read: truncated stream");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void tnsr_write(std::ostream& os, const Shape& shape, const std::vector<double>& data) {
  os.write("TNSR", 4);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put<std::uint64_t>(os, static_cast<std::uint64_t>(d));
  os.write(reinterpret_cast<const char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(double)));
}

void tnsr_write(std::ostream& os, const Tensor& t) {
  tnsr_write(os, t.shape(), t.data());
}

TnsrBlob tnsr_read(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "TNSR", 4) != 0)
    throw ValidationError("tnsr_read: bad magic (expected TNSR)");
  std::uint32_t rank = get<std::uint32_t>(is);
  if (rank > 8) throw ValidationError("tnsr_read: implausible rank");
  TnsrBlob blob;
  std::size_t n = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    std::uint64_t d = get<std::uint64_t>(is);
    blob.shape.push_back(static_cast<std::size_t>(d));
    n *= static_cast<std::size_t>(d);
  }
  blob.data.resize(n);
  is.read(reinterpret_cast<char*>(blob.data.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw ValidationError("tnsr_read: truncated payload");
  return blob;
}

}  // namespace cycledance
