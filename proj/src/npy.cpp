// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dgdm/npy.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>
#include <stdexcept>

namespace dgdm::npy {

namespace {

constexpr char kMagic[] = "\x93NUMPY";

const char* descr(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat: return "<f4";
    case torch::kDouble: return "<f8";
    case torch::kUInt8: return "|u1";
    case torch::kLong: return "<i8";
    default: throw std::invalid_argument("npy: unsupported dtype " + std::string(c10::toString(t)));
  }
}

torch::ScalarType from_descr(const std::string& d) {
  if (d == "<f4") return torch::kFloat;
  if (d == "<f8") return torch::kDouble;
  if (d == "|u1" || d == "<u1") return torch::kUInt8;
  if (d == "<i8") return torch::kLong;
  throw std::runtime_error("npy: unsupported dtype '" + d + "'");
}

}  // namespace

void write(const std::string& path, const torch::Tensor& tensor) {
  auto t = tensor.contiguous().cpu();
  std::string shape = "(";
  for (std::int64_t i = 0; i < t.dim(); ++i) {
    shape += (i ? ", " : "") + std::to_string(t.size(i));
  }
  shape += t.dim() == 1 ? ",)" : ")";
  std::string header = "{'descr': '" + std::string(descr(t.scalar_type())) +
                       "', 'fortran_order': False, 'shape': " + shape + ", }";
  // Magic (6) + version (2) + length (2) + header + '\n' padded to 64 bytes.
  const auto total = 10 + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header += '\n';

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("npy: cannot open " + path + " for writing");
  out.write(kMagic, 6);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const auto len = static_cast<std::uint16_t>(header.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
  if (!out) throw std::runtime_error("npy: write failed for " + path);
}

torch::Tensor read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("npy: cannot open " + path);
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0) throw std::runtime_error("npy: bad magic in " + path);
  unsigned char version[2];
  in.read(reinterpret_cast<char*>(version), 2);
  std::size_t len = 0;
  if (version[0] == 1) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    len = b[0] | (static_cast<std::size_t>(b[1]) << 8);
  } else if (version[0] == 2 || version[0] == 3) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    len = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::size_t>(b[3]) << 24);
  } else {
    throw std::runtime_error("npy: unsupported version in " + path);
  }
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));

  std::smatch m;
  if (!std::regex_search(header, m, std::regex("'descr':\\s*'([^']+)'"))) {
    throw std::runtime_error("npy: no descr in " + path);
  }
  const auto dtype = from_descr(m[1]);
  if (std::regex_search(header, m, std::regex("'fortran_order':\\s*True"))) {
    throw std::runtime_error("npy: Fortran-ordered arrays are not supported (" + path + ")");
  }
  if (!std::regex_search(header, m, std::regex("'shape':\\s*\\(([^)]*)\\)"))) {
    throw std::runtime_error("npy: no shape in " + path);
  }
  std::vector<std::int64_t> shape;
  const std::string dims = m[1];
  std::regex num("\\d+");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), num); it != std::sregex_iterator(); ++it) {
    shape.push_back(std::stoll(it->str()));
  }
  auto t = torch::empty(shape, dtype);
  in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
  if (!in) throw std::runtime_error("npy: truncated data in " + path);
  return t;
}

}  // namespace dgdm::npy
