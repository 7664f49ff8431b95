#pragma once

#include <memory>
#include <string>
#include <sys/types.h>

#include "pnpsr/protocol.hpp"

namespace pnpsr {

/// A connected byte stream carrying PNPD frames. One request in flight at a
/// time; not safe for concurrent use.
class FrameStream {
 public:
  virtual ~FrameStream() = default;
  virtual void send(const protocol::Frame& frame) = 0;
  virtual protocol::Frame receive() = 0;
};

/// Frames over a stream socket file descriptor. Owns the descriptor.
class SocketFrameStream : public FrameStream {
 public:
  explicit SocketFrameStream(int fd, pid_t child = -1);
  ~SocketFrameStream() override;
  SocketFrameStream(const SocketFrameStream&) = delete;
  SocketFrameStream& operator=(const SocketFrameStream&) = delete;

  void send(const protocol::Frame& frame) override;
  protocol::Frame receive() override;

 private:
  int fd_;
  pid_t child_;
};

/// Opens a connection from a descriptor:
///   unix:<path>      connect to a listening Unix-domain stream socket
///   exec:<command>   spawn `/bin/sh -c <command>` and talk over its stdin/stdout
/// Throws TransportError with phase "connect" on failure.
std::unique_ptr<FrameStream> open_frame_stream(const std::string& descriptor);

}  // namespace pnpsr
