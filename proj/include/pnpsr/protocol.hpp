#pragma once

// PNPD external-denoiser wire format.
//
// Every message is a frame:
//
//   offset  size  field
//   0       4     magic "PNPD"
//   4       1     version (0x01)
//   5       1     opcode
//   6       4     payload length N, u32 little-endian
//   10      N     payload
//
// Payloads (all integers little-endian, reals IEEE-754 little-endian):
//
//   HANDSHAKE request   empty
//   HANDSHAKE reply     u32 capability bitmask (bit0: supports VJP)
//   DENOISE request     f64 sigma, u32 height, u32 width, height*width f32 pixels
//   DENOISE reply       u32 height, u32 width, height*width f32 pixels
//   VJP request         f64 sigma, u32 height, u32 width, x pixels, u pixels (f32)
//   VJP reply           u32 height, u32 width, height*width f32 pixels
//   ERROR               u32 code, UTF-8 message (rest of payload)
//
// Pixels are row-major and transmitted as-is, without rescaling.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnpsr/grid.hpp"

namespace pnpsr::protocol {

inline constexpr std::uint8_t kMagic[4] = {'P', 'N', 'P', 'D'};
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 10;
/// Upper bound on a payload the client will accept (256 MiB).
inline constexpr std::uint32_t kMaxPayload = 256u << 20;

inline constexpr std::uint32_t kCapabilityVjp = 0x1;

enum class Opcode : std::uint8_t {
  kHandshake = 0x01,
  kDenoiseRequest = 0x02,
  kDenoiseReply = 0x03,
  kVjpRequest = 0x04,
  kVjpReply = 0x05,
  kError = 0x7F,
};

/// Malformed bytes on the wire.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Frame {
  Opcode opcode{};
  std::vector<std::uint8_t> payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct FrameHeader {
  Opcode opcode{};
  std::uint32_t payload_length = 0;
};

std::vector<std::uint8_t> encode_frame(const Frame& frame);
/// Validates magic, version, opcode, and the length bound.
FrameHeader decode_header(std::span<const std::uint8_t> header);
/// Decodes one complete frame; trailing bytes are an error.
Frame decode_frame(std::span<const std::uint8_t> bytes);

/// A float32 grid as carried on the wire.
struct WireGrid {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> pixels;

  friend bool operator==(const WireGrid&, const WireGrid&) = default;
};

WireGrid to_wire(const ImageGrid& image);
ImageGrid from_wire(const WireGrid& grid);

struct DenoiseRequest {
  double sigma = 0.0;
  WireGrid image;
};

struct VjpRequest {
  double sigma = 0.0;
  WireGrid x;
  WireGrid u;  // same height/width as x
};

struct ErrorReply {
  std::uint32_t code = 0;
  std::string message;
};

Frame make_handshake_request();
Frame make_handshake_reply(std::uint32_t capabilities);
Frame make_denoise_request(const DenoiseRequest& req);
Frame make_grid_reply(Opcode opcode, const WireGrid& grid);
Frame make_vjp_request(const VjpRequest& req);
Frame make_error(const ErrorReply& err);

std::uint32_t parse_handshake_reply(const Frame& frame);
DenoiseRequest parse_denoise_request(const Frame& frame);
WireGrid parse_grid_reply(const Frame& frame, Opcode expected);
VjpRequest parse_vjp_request(const Frame& frame);
ErrorReply parse_error(const Frame& frame);

}  // namespace pnpsr::protocol
