#include <cstring>
#include <fstream>

#include "tp/io.hpp"
#include "tp/tensor.hpp"  // shape_numel

namespace tp {

namespace {

constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError(std::string("checkpoint: truncated reading ") + what);
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, std::uint32_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}

std::string take_string(std::istream& is, const char* what) {
  auto n = take<std::uint32_t>(is, what);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw IoError(std::string("checkpoint: truncated reading ") + what);
  return s;
}

}  // namespace

void Checkpoint::put(const std::string& name, std::vector<int> shape,
                     std::vector<float> data) {
  contract(shape_numel(shape) == data.size(), "checkpoint: shape/data mismatch for " + name);
  contract(!has(name), "checkpoint: duplicate tensor " + name);
  tensors.emplace_back(name, std::make_pair(std::move(shape), std::move(data)));
}

const std::pair<std::vector<int>, std::vector<float>>& Checkpoint::get(
    const std::string& name) const {
  for (const auto& [k, v] : tensors)
    if (k == name) return v;
  throw IoError("checkpoint: missing tensor " + name);
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [k, v] : tensors)
    if (k == name) return true;
  return false;
}

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_checkpoint: cannot open " + path);
  os.write("TPCK", 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, ck.step);
  put_string(os, ck.config_echo);
  put<std::uint32_t>(os, std::uint32_t(ck.tensors.size()));
  for (const auto& [name, sv] : ck.tensors) {
    put_string(os, name);
    put<std::uint32_t>(os, std::uint32_t(sv.first.size()));
    for (int d : sv.first) put<std::int32_t>(os, d);
    put<std::uint64_t>(os, sv.second.size());
    os.write(reinterpret_cast<const char*>(sv.second.data()),
             std::streamsize(sv.second.size() * sizeof(float)));
  }
  if (!os) throw IoError("write_checkpoint: write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "TPCK", 4) != 0)
    throw IoError("read_checkpoint: bad magic in " + path);
  auto version = take<std::uint32_t>(is, "version");
  if (version != kVersion)
    throw IoError("read_checkpoint: unsupported version in " + path);
  Checkpoint ck;
  ck.step = take<std::uint64_t>(is, "step");
  ck.config_echo = take_string(is, "config echo");
  auto count = take<std::uint32_t>(is, "tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = take_string(is, "tensor name");
    auto ndim = take<std::uint32_t>(is, "rank");
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = take<std::int32_t>(is, "dim");
    auto numel = take<std::uint64_t>(is, "numel");
    if (numel != shape_numel(shape))
      throw IoError("read_checkpoint: shape/numel mismatch for " + name);
    std::vector<float> data(numel);
    is.read(reinterpret_cast<char*>(data.data()), std::streamsize(numel * sizeof(float)));
    if (!is) throw IoError("read_checkpoint: truncated tensor " + name);
    ck.tensors.emplace_back(std::move(name), std::make_pair(std::move(shape), std::move(data)));
  }
  return ck;
}

}  // namespace tp
