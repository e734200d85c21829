#include <bit>
#include <cstring>
#include <fstream>

#include "tp/io.hpp"

namespace tp {

namespace {

// All multi-byte fields little-endian; asserted rather than byte-swapped.
static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError(std::string("tpdm: truncated reading ") + what);
  return v;
}

}  // namespace

void write_tpdm(const std::string& path, const Image& depth) {
  contract(depth.c == 1, "write_tpdm: depth must be single-channel");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_tpdm: cannot open " + path);
  os.write("TPDM", 4);
  put<std::uint32_t>(os, depth.w);
  put<std::uint32_t>(os, depth.h);
  put<std::uint32_t>(os, 0);  // reserved
  os.write(reinterpret_cast<const char*>(depth.data.data()),
           std::streamsize(depth.data.size() * sizeof(float)));
  if (!os) throw IoError("write_tpdm: write failed for " + path);
}

Image read_tpdm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_tpdm: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "TPDM", 4) != 0)
    throw IoError("read_tpdm: bad magic in " + path);
  auto w = take<std::uint32_t>(is, "width");
  auto h = take<std::uint32_t>(is, "height");
  take<std::uint32_t>(is, "reserved");
  contract(w > 0 && h > 0 && w < (1u << 20) && h < (1u << 20), "read_tpdm: absurd dimensions");
  Image img(int(w), int(h), 1);
  is.read(reinterpret_cast<char*>(img.data.data()),
          std::streamsize(img.data.size() * sizeof(float)));
  if (!is) throw IoError("read_tpdm: truncated data in " + path);
  return img;
}

}  // namespace tp
