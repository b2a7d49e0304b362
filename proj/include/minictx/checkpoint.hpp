#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "minictx/tensor.hpp"

namespace minictx::ckpt {

static_assert(std::endian::native == std::endian::little,
              "MCTX1 payloads are little-endian; big-endian hosts are unsupported");

// MCTX1 container:
//   bytes 0..7   magic "MCTX1" padded with NULs
//   bytes 8..11  header length (uint32, little-endian)
//   header       UTF-8 JSON: tensor name -> {shape, dtype ("f32"|"f64"), offset}
//   payload      raw little-endian values, row-major, in header order;
//                offset is relative to the payload start.
inline constexpr char kMagic[8] = {'M', 'C', 'T', 'X', '1', '\0', '\0', '\0'};

inline void save(const std::string& path, const ParamList& params) {
  nlohmann::ordered_json header = nlohmann::ordered_json::object();
  std::uint64_t offset = 0;
  for (const auto& p : params) {
    const Tensor& t = *p.value;
    header[t.name()] = {{"shape", t.shape()}, {"dtype", "f64"}, {"offset", offset}};
    offset += t.size() * sizeof(double);
  }
  const std::string hs = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 8);
  const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
  out.write(reinterpret_cast<const char*>(&hlen), 4);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& p : params) {
    const Tensor& t = *p.value;
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

inline std::map<std::string, Tensor> load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError("not an MCTX1 checkpoint: " + path);
  }
  std::uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 4);
  if (!in) throw DataError("truncated checkpoint header: " + path);
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  if (!in) throw DataError("truncated checkpoint header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad checkpoint header in " + path + ": " + e.what());
  }
  const std::streampos payload_start = in.tellg();
  std::map<std::string, Tensor> tensors;
  for (auto it = header.begin(); it != header.end(); ++it) {
    const auto& meta = it.value();
    std::vector<std::size_t> shape = meta.at("shape").get<std::vector<std::size_t>>();
    const std::string dtype = meta.at("dtype").get<std::string>();
    const std::uint64_t offset = meta.at("offset").get<std::uint64_t>();
    Tensor t(it.key(), shape);
    in.seekg(payload_start + static_cast<std::streamoff>(offset));
    if (dtype == "f64") {
      in.read(reinterpret_cast<char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
    } else if (dtype == "f32") {
      std::vector<float> buf(t.size());
      in.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(buf[i]);
    } else {
      throw DataError("unknown dtype '" + dtype + "' for tensor " + it.key());
    }
    if (!in) throw DataError("truncated payload for tensor " + it.key() + " in " + path);
    tensors.emplace(it.key(), std::move(t));
  }
  return tensors;
}

/// Copies loaded tensors into live parameters by name, checking shapes.
/// Tensors in the map but not in params are ignored; the reverse is an error.
inline void load_into(const ParamList& params, const std::map<std::string, Tensor>& loaded,
                      const std::string& context) {
  for (const auto& p : params) {
    Tensor& dst = *p.value;
    auto it = loaded.find(dst.name());
    if (it == loaded.end()) {
      throw DataError(context + ": missing tensor " + dst.name());
    }
    if (!dst.same_shape(it->second)) {
      throw DataError(context + ": shape mismatch for tensor " + dst.name());
    }
    std::memcpy(dst.data(), it->second.data(), dst.size() * sizeof(double));
  }
}

}  // namespace minictx::ckpt
