#include "pnpsr/protocol.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace pnpsr::protocol {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::span<const std::uint8_t> rest() {
    auto r = bytes_.subspan(pos_);
    pos_ = bytes_.size();
    return r;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void expect_end() const {
    if (pos_ != bytes_.size()) throw ProtocolError("trailing bytes in payload");
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ProtocolError("payload truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

bool known_opcode(std::uint8_t op) {
  switch (static_cast<Opcode>(op)) {
    case Opcode::kHandshake:
    case Opcode::kDenoiseRequest:
    case Opcode::kDenoiseReply:
    case Opcode::kVjpRequest:
    case Opcode::kVjpReply:
    case Opcode::kError:
      return true;
  }
  return false;
}

void write_dims(Writer& w, const WireGrid& g) {
  w.u32(g.height);
  w.u32(g.width);
}

void write_pixels(Writer& w, const WireGrid& g) {
  for (float p : g.pixels) w.f32(p);
}

WireGrid read_grid(Reader& r, std::uint32_t height, std::uint32_t width) {
  if (height == 0 || width == 0) throw ProtocolError("grid dimensions must be positive");
  const std::uint64_t count = static_cast<std::uint64_t>(height) * width;
  if (count * 4 > r.remaining()) throw ProtocolError("grid pixels truncated");
  WireGrid g{height, width, {}};
  g.pixels.resize(static_cast<std::size_t>(count));
  for (auto& p : g.pixels) p = r.f32();
  return g;
}

void expect_opcode(const Frame& frame, Opcode op) {
  if (frame.opcode != op) throw ProtocolError("unexpected opcode");
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  if (frame.payload.size() > kMaxPayload) throw ProtocolError("payload too large");
  Writer w;
  w.raw(kMagic);
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(frame.opcode));
  w.u32(static_cast<std::uint32_t>(frame.payload.size()));
  w.raw(frame.payload);
  return w.take();
}

FrameHeader decode_header(std::span<const std::uint8_t> header) {
  if (header.size() < kHeaderSize) throw ProtocolError("frame header truncated");
  if (std::memcmp(header.data(), kMagic, 4) != 0) throw ProtocolError("bad magic");
  if (header[4] != kVersion) throw ProtocolError("unsupported protocol version");
  if (!known_opcode(header[5])) throw ProtocolError("unknown opcode");
  Reader r(header.subspan(6, 4));
  const std::uint32_t len = r.u32();
  if (len > kMaxPayload) throw ProtocolError("payload length exceeds limit");
  return {static_cast<Opcode>(header[5]), len};
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  const FrameHeader h = decode_header(bytes);
  if (bytes.size() - kHeaderSize != h.payload_length) {
    throw ProtocolError("frame length does not match header");
  }
  auto body = bytes.subspan(kHeaderSize);
  return {h.opcode, {body.begin(), body.end()}};
}

WireGrid to_wire(const ImageGrid& image) {
  WireGrid g{static_cast<std::uint32_t>(image.height()), static_cast<std::uint32_t>(image.width()),
             {}};
  g.pixels.resize(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) g.pixels[i] = static_cast<float>(image[i]);
  return g;
}

ImageGrid from_wire(const WireGrid& grid) {
  std::vector<double> data(grid.pixels.begin(), grid.pixels.end());
  for (double v : data) {
    if (!std::isfinite(v)) throw ProtocolError("non-finite pixel in grid");
  }
  return ImageGrid(grid.height, grid.width, std::move(data));
}

Frame make_handshake_request() { return {Opcode::kHandshake, {}}; }

Frame make_handshake_reply(std::uint32_t capabilities) {
  Writer w;
  w.u32(capabilities);
  return {Opcode::kHandshake, w.take()};
}

Frame make_denoise_request(const DenoiseRequest& req) {
  Writer w;
  w.f64(req.sigma);
  write_dims(w, req.image);
  write_pixels(w, req.image);
  return {Opcode::kDenoiseRequest, w.take()};
}

Frame make_grid_reply(Opcode opcode, const WireGrid& grid) {
  Writer w;
  write_dims(w, grid);
  write_pixels(w, grid);
  return {opcode, w.take()};
}

Frame make_vjp_request(const VjpRequest& req) {
  if (req.x.height != req.u.height || req.x.width != req.u.width) {
    throw ProtocolError("vjp request grids differ in shape");
  }
  Writer w;
  w.f64(req.sigma);
  write_dims(w, req.x);
  write_pixels(w, req.x);
  write_pixels(w, req.u);
  return {Opcode::kVjpRequest, w.take()};
}

Frame make_error(const ErrorReply& err) {
  Writer w;
  w.u32(err.code);
  w.raw(std::span(reinterpret_cast<const std::uint8_t*>(err.message.data()), err.message.size()));
  return {Opcode::kError, w.take()};
}

std::uint32_t parse_handshake_reply(const Frame& frame) {
  expect_opcode(frame, Opcode::kHandshake);
  Reader r(frame.payload);
  const std::uint32_t caps = r.u32();
  r.expect_end();
  return caps;
}

DenoiseRequest parse_denoise_request(const Frame& frame) {
  expect_opcode(frame, Opcode::kDenoiseRequest);
  Reader r(frame.payload);
  DenoiseRequest req;
  req.sigma = r.f64();
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  req.image = read_grid(r, h, w);
  r.expect_end();
  return req;
}

WireGrid parse_grid_reply(const Frame& frame, Opcode expected) {
  expect_opcode(frame, expected);
  Reader r(frame.payload);
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  WireGrid g = read_grid(r, h, w);
  r.expect_end();
  return g;
}

VjpRequest parse_vjp_request(const Frame& frame) {
  expect_opcode(frame, Opcode::kVjpRequest);
  Reader r(frame.payload);
  VjpRequest req;
  req.sigma = r.f64();
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  req.x = read_grid(r, h, w);
  req.u = read_grid(r, h, w);
  r.expect_end();
  return req;
}

ErrorReply parse_error(const Frame& frame) {
  expect_opcode(frame, Opcode::kError);
  Reader r(frame.payload);
  ErrorReply err;
  err.code = r.u32();
  auto msg = r.rest();
  err.message.assign(reinterpret_cast<const char*>(msg.data()), msg.size());
  return err;
}

}  // namespace pnpsr::protocol
