#include <bit>
#include <cstring>

#include "rplift/error.hpp"
#include "rplift/io.hpp"

namespace rplift {

namespace {

constexpr std::uint8_t kFlagAngles = 0x1;
constexpr char kMagic[4] = {'B', 'L', 'A', 'M'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(bytes[offset + i]) << (8 * i));
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_attribute_maps(const AttributeMaps& maps) {
  std::vector<std::uint8_t> out;
  out.reserve(kAttributeMapHeaderSize + maps.data().size() * 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint16_t>(out, kAttributeMapVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(maps.layout()));
  put_le<std::uint8_t>(out, maps.has_angles() ? kFlagAngles : 0);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(maps.width()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(maps.height()));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(maps.num_channels()));
  for (double v : maps.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

AttributeMaps decode_attribute_maps(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "not an attribute map file");
  }
  if (bytes.size() < kAttributeMapHeaderSize) {
    throw Error(ErrorCode::SizeMismatch, "truncated header: " + std::to_string(bytes.size()) + " bytes");
  }
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kAttributeMapVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "version " + std::to_string(version));
  }
  const auto layout_byte = get_le<std::uint8_t>(bytes, 6);
  if (layout_byte != 2 && layout_byte != 8) {
    throw Error(ErrorCode::UnsupportedFormat, "layout " + std::to_string(layout_byte));
  }
  const auto flags = get_le<std::uint8_t>(bytes, 7);
  if ((flags & ~kFlagAngles) != 0) throw Error(ErrorCode::UnsupportedFormat, "unknown flags " + std::to_string(flags));
  const auto width = get_le<std::uint32_t>(bytes, 8);
  const auto height = get_le<std::uint32_t>(bytes, 12);
  const auto channels = get_le<std::uint16_t>(bytes, 16);
  const auto layout = static_cast<RPLayout>(layout_byte);
  const bool has_angles = (flags & kFlagAngles) != 0;
  if (channels != AttributeMaps::channel_count(layout, has_angles)) {
    throw Error(ErrorCode::SizeMismatch, "channel count " + std::to_string(channels) + " does not match layout");
  }
  if (width == 0 || height == 0 || width > 1u << 16 || height > 1u << 16) {
    throw Error(ErrorCode::SizeMismatch, "image size " + std::to_string(width) + "x" + std::to_string(height));
  }
  const std::uint64_t payload = std::uint64_t{width} * height * channels * 4;
  if (bytes.size() - kAttributeMapHeaderSize != payload) {
    throw Error(ErrorCode::SizeMismatch, "expected " + std::to_string(payload + kAttributeMapHeaderSize) +
                                             " bytes, got " + std::to_string(bytes.size()));
  }
  AttributeMaps maps(static_cast<int>(width), static_cast<int>(height), layout, has_angles);
  auto& data = maps.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, kAttributeMapHeaderSize + 4 * i));
  }
  return maps;
}

}  // namespace rplift
