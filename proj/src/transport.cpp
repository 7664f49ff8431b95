#include "pnpsr/transport.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include "pnpsr/errors.hpp"

namespace pnpsr {

namespace {

std::string errno_text() { return std::strerror(errno); }

}  // namespace

SocketFrameStream::SocketFrameStream(int fd, pid_t child) : fd_(fd), child_(child) {}

SocketFrameStream::~SocketFrameStream() {
  if (fd_ >= 0) ::close(fd_);
  if (child_ > 0) {
    // Closing our end gives the child EOF; reap it so no zombie is left, and
    // kill it if it has not exited within about a second.
    int status = 0;
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(child_, &status, WNOHANG) != 0) return;
      ::usleep(10000);
    }
    ::kill(child_, SIGKILL);
    ::waitpid(child_, &status, 0);
  }
}

void SocketFrameStream::send(const protocol::Frame& frame) {
  const std::vector<std::uint8_t> bytes = protocol::encode_frame(frame);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error("send failed: " + errno_text());
    }
    off += static_cast<std::size_t>(n);
  }
}

namespace {

void read_exact(int fd, std::uint8_t* dst, std::size_t n) {
  std::size_t off = 0;
  while (off < n) {
    const ssize_t r = ::recv(fd, dst + off, n - off, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error("recv failed: " + errno_text());
    }
    if (r == 0) throw std::runtime_error("connection closed by peer");
    off += static_cast<std::size_t>(r);
  }
}

}  // namespace

protocol::Frame SocketFrameStream::receive() {
  std::uint8_t header[protocol::kHeaderSize];
  read_exact(fd_, header, sizeof header);
  const protocol::FrameHeader h = protocol::decode_header(header);
  protocol::Frame frame{h.opcode, std::vector<std::uint8_t>(h.payload_length)};
  if (h.payload_length > 0) read_exact(fd_, frame.payload.data(), h.payload_length);
  return frame;
}

std::unique_ptr<FrameStream> open_frame_stream(const std::string& descriptor) {
  if (descriptor.rfind("unix:", 0) == 0) {
    const std::string path = descriptor.substr(5);
    sockaddr_un addr{};
    if (path.empty() || path.size() >= sizeof(addr.sun_path)) {
      throw TransportError("connect", "invalid unix socket path '" + path + "'");
    }
    const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw TransportError("connect", "socket(): " + errno_text());
    addr.sun_family = AF_UNIX;
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      const std::string why = errno_text();
      ::close(fd);
      throw TransportError("connect", "connect(" + path + "): " + why);
    }
    return std::make_unique<SocketFrameStream>(fd);
  }

  if (descriptor.rfind("exec:", 0) == 0) {
    const std::string command = descriptor.substr(5);
    if (command.empty()) throw TransportError("connect", "empty exec command");
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
      throw TransportError("connect", "socketpair(): " + errno_text());
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
      ::close(fds[0]);
      ::close(fds[1]);
      throw TransportError("connect", "fork(): " + errno_text());
    }
    if (pid == 0) {
      ::dup2(fds[1], STDIN_FILENO);
      ::dup2(fds[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(fds[1]);
    return std::make_unique<SocketFrameStream>(fds[0], pid);
  }

  throw TransportError("connect", "unrecognized endpoint descriptor '" + descriptor +
                                      "' (expected unix:<path> or exec:<command>)");
}

}  // namespace pnpsr
