#include <openssl/evp.h>

#include <fstream>

#include "tp/io.hpp"

namespace tp {

namespace {

std::string hex(const unsigned char* d, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string out(2 * n, '0');
  for (unsigned i = 0; i < n; ++i) {
    out[2 * i] = digits[d[i] >> 4];
    out[2 * i + 1] = digits[d[i] & 0xF];
  }
  return out;
}

}  // namespace

std::string sha256_hex(const void* data, std::size_t n) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (!EVP_Digest(data, n, md, &len, EVP_sha256(), nullptr))
    throw IoError("sha256: digest failure");
  return hex(md, len);
}

std::string sha256_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("sha256: cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || !EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr)) {
    EVP_MD_CTX_free(ctx);
    throw IoError("sha256: init failure");
  }
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof(buf));
    if (is.gcount() > 0 && !EVP_DigestUpdate(ctx, buf, std::size_t(is.gcount()))) {
      EVP_MD_CTX_free(ctx);
      throw IoError("sha256: update failure");
    }
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (!EVP_DigestFinal_ex(ctx, md, &len)) {
    EVP_MD_CTX_free(ctx);
    throw IoError("sha256: final failure");
  }
  EVP_MD_CTX_free(ctx);
  return hex(md, len);
}

}  // namespace tp
