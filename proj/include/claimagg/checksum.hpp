#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <openssl/evp.h>

#include "claimagg/error.hpp"

namespace claimagg {

struct FileDigest {
  std::string sha256;  // lowercase hex
  std::uintmax_t bytes = 0;
};

inline FileDigest sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256: init failed");
  std::array<char, 1 << 16> buf{};
  FileDigest out;
  while (in) {
    in.read(buf.data(), buf.size());
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got == 0) break;
    out.bytes += got;
    EVP_DigestUpdate(ctx.get(), buf.data(), got);
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char hex[] = "0123456789abcdef";
  out.sha256.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.sha256.push_back(hex[md[i] >> 4]);
    out.sha256.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

}  // namespace claimagg
