#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "robusteval/error.hpp"
#include "robusteval/numeric.hpp"

namespace robusteval {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense f32 tensor, row-major. Immutable shape; data is finite by construction.
class TensorBlock {
 public:
  TensorBlock() = default;

  explicit TensorBlock(Shape shape) : shape_(std::move(shape)), data_(element_count(shape_), 0.0f) {
    check_extents();
  }

  TensorBlock(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    require(data_.size() == element_count(shape_), Errc::shape_mismatch,
            "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                shape_string(shape_));
    require(all_finite<float>(data_), Errc::non_finite, "tensor contains non-finite values");
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }

  bool operator==(const TensorBlock&) const = default;

 private:
  void check_extents() const {
    for (std::size_t e : shape_) {
      require(e > 0, Errc::shape_mismatch, "tensor extents must be positive, got " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<float> data_;
};

// ---------------------------------------------------------------------------
// .rtt container
//
//   "RTRC1\n" | u32 LE header length | UTF-8 JSON header | f32 LE payload
// ---------------------------------------------------------------------------

inline constexpr std::string_view kRttMagic = "RTRC1\n";

struct RttContents {
  TensorBlock block;
  std::vector<std::string> sample_ids;
};

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), Errc::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), Errc::io, "write failed for " + path.string());
}

inline void check_unique_ids(std::span<const std::string> ids, const std::string& where) {
  std::unordered_set<std::string_view> seen;
  for (const auto& id : ids) {
    require(seen.insert(id).second, Errc::duplicate_id, "duplicate sample_id '" + id + "' in " + where);
  }
}

}  // namespace detail

inline std::string encode_rtt(const TensorBlock& block, std::span<const std::string> sample_ids = {}) {
  nlohmann::json header;
  header["dtype"] = "f32";
  header["shape"] = block.shape();
  header["order"] = "row-major";
  if (!sample_ids.empty()) {
    detail::check_unique_ids(sample_ids, "rtt header");
    header["sample_ids"] = std::vector<std::string>(sample_ids.begin(), sample_ids.end());
  }
  const std::string text = header.dump();

  std::string out(kRttMagic);
  detail::put_u32le(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + 4 * block.size());
  for (float f : block.data()) detail::put_u32le(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline RttContents decode_rtt(std::string_view bytes, const std::string& name = "<memory>") {
  require(bytes.size() >= kRttMagic.size() && bytes.substr(0, kRttMagic.size()) == kRttMagic, Errc::bad_magic,
          name + ": missing RTRC1 magic");
  std::size_t pos = kRttMagic.size();
  require(bytes.size() >= pos + 4, Errc::truncated_payload, name + ": truncated header length");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t header_len = detail::get_u32le(raw + pos);
  pos += 4;
  require(bytes.size() - pos >= header_len, Errc::truncated_payload, name + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_header, name + ": header is not valid JSON: " + e.what());
  }
  pos += header_len;

  Shape shape;
  std::vector<std::string> ids;
  try {
    require(header.is_object(), Errc::bad_header, name + ": header must be an object");
    require(header.value("dtype", "") == "f32", Errc::bad_header, name + ": dtype must be \"f32\"");
    if (header.contains("order")) {
      require(header["order"] == "row-major", Errc::bad_header, name + ": order must be \"row-major\"");
    }
    require(header.contains("shape") && header["shape"].is_array(), Errc::bad_header, name + ": missing shape");
    for (const auto& e : header["shape"]) {
      require(e.is_number_unsigned() && e.get<std::size_t>() > 0, Errc::bad_header,
              name + ": shape extents must be positive integers");
      shape.push_back(e.get<std::size_t>());
    }
    if (header.contains("sample_ids")) ids = header["sample_ids"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::bad_header, name + ": malformed header: " + e.what());
  }

  const std::size_t count = element_count(shape);
  const std::size_t have = bytes.size() - pos;
  require(have >= 4 * count, Errc::truncated_payload,
          name + ": payload holds " + std::to_string(have / 4) + " elements, shape " + shape_string(shape) +
              " needs " + std::to_string(count));
  require(have == 4 * count, Errc::shape_mismatch,
          name + ": payload has " + std::to_string(have - 4 * count) + " trailing bytes beyond shape " +
              shape_string(shape));

  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(detail::get_u32le(raw + pos + 4 * i));
    require(std::isfinite(data[i]), Errc::non_finite, name + ": non-finite element at index " + std::to_string(i));
  }
  if (!ids.empty()) {
    require(!shape.empty() && ids.size() == shape[0], Errc::shape_mismatch,
            name + ": sample_ids count does not match leading extent");
    detail::check_unique_ids(ids, name);
  }
  return {TensorBlock(std::move(shape), std::move(data)), std::move(ids)};
}

inline void write_rtt(const std::filesystem::path& path, const TensorBlock& block,
                      std::span<const std::string> sample_ids = {}) {
  detail::write_file(path, encode_rtt(block, sample_ids));
}

inline RttContents read_rtt(const std::filesystem::path& path) {
  return decode_rtt(detail::read_file(path), path.string());
}

inline void write_tensor(const std::filesystem::path& path, const TensorBlock& block) { write_rtt(path, block); }

inline TensorBlock load_tensor(const std::filesystem::path& path) { return read_rtt(path).block; }

/// Splits a [S, ...] block into S blocks of the trailing shape.
inline std::vector<TensorBlock> unstack(const TensorBlock& stacked) {
  const Shape& s = stacked.shape();
  require(!s.empty(), Errc::shape_mismatch, "cannot unstack a rank-0 tensor");
  Shape inner(s.begin() + 1, s.end());
  const std::size_t n = element_count(inner);
  std::vector<TensorBlock> out;
  out.reserve(s[0]);
  for (std::size_t i = 0; i < s[0]; ++i) {
    auto first = stacked.data().begin() + static_cast<std::ptrdiff_t>(i * n);
    out.emplace_back(inner, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(n)));
  }
  return out;
}

inline TensorBlock stack(std::span<const TensorBlock> blocks) {
  require(!blocks.empty(), Errc::empty_input, "cannot stack zero tensors");
  Shape shape{blocks.size()};
  shape.insert(shape.end(), blocks[0].shape().begin(), blocks[0].shape().end());
  std::vector<float> data;
  data.reserve(element_count(shape));
  for (const auto& b : blocks) {
    require(b.shape() == blocks[0].shape(), Errc::shape_mismatch, "cannot stack tensors of differing shapes");
    data.insert(data.end(), b.data().begin(), b.data().end());
  }
  return TensorBlock(std::move(shape), std::move(data));
}

}  // namespace robusteval
